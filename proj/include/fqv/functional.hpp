#pragma once

// Non-anticipative functionals F(t, omega) over sampled paths, as a small
// closed algebra:
//
//   cylindrical      f(t, omega(t))     (time weight optional)
//   running integral int_0^t g(omega(s)) ds   (left-endpoint sums on the grid)
//   sums, products, and scalar composition phi(F)
//
// Leaves carry analytic state derivatives up to order three and a first
// time derivative, combined by exact chain/Leibniz rules.  The state
// (vertical) derivative bumps the path value at the evaluation time only;
// the time (horizontal) derivative moves time forward along the path frozen
// at t.  Running integrals read strictly before t, so their vertical
// derivative vanishes identically.
//
// Functionals are scalar-valued over d-dimensional paths; gradients have
// size d, Hessians d*d, third derivatives d*d*d (row-major).

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "fqv/partition.hpp"
#include "fqv/path.hpp"

namespace fqv {

// Value plus vertical derivatives up to `order`.
struct Jet {
  int dim = 0;
  int order = 0;
  double v = 0.0;
  std::vector<double> grad;   // dim
  std::vector<double> hess;   // dim*dim
  std::vector<double> third;  // dim*dim*dim
  void reset(int d, int ord);
};

class FunctionalNode;
using NodePtr = std::shared_ptr<const FunctionalNode>;

// Scalar building block u -> g(u) with three derivatives, applied to one
// path coordinate by cylindrical and running-integral leaves.
struct ScalarMap {
  enum class Kind { poly, sine };
  Kind kind = Kind::poly;
  std::vector<double> coeffs{0.0, 1.0};  // poly: sum coeffs[j] u^j
  double frequency = 1.0;                // sine: sin(frequency * u)
  double value(double u) const;
  double d1(double u) const;
  double d2(double u) const;
  double d3(double u) const;
  std::string describe() const;
};

class Functional {
 public:
  Functional() = default;
  explicit Functional(NodePtr root);

  const NodePtr& root() const { return root_; }
  bool empty() const { return root_ == nullptr; }
  // Highest vertical derivative the whole tree can deliver (0..3).
  int state_order() const;
  // True when the horizontal derivative is identically zero by structure.
  bool horizontal_is_zero() const;
  std::string describe() const;

  // -- construction ---------------------------------------------------------
  struct CylSpec {
    int coord = 0;
    bool time_weighted = false;  // f = t * g(x_c) instead of g(x_c)
    ScalarMap map;
    int max_order = 3;           // advertised vertical derivative order
  };
  static Functional cylinder(const CylSpec& spec);
  static Functional cylinder(const std::string& name);       // x, x2, x3, tx, sin_x
  static Functional running_integral(const ScalarMap& g, int coord = 0);
  static Functional running_integral(const std::string& gname);
  static Functional sum(std::vector<Functional> terms);
  static Functional product(Functional a, Functional b);
  static Functional compose(const std::string& phi_name, Functional inner);  // sq, cube, sin, exp

  // JSON expression grammar:
  //   {"cyl": "x2"}  {"cyl": {"poly": [c0,c1,...]}}  {"cyl": {"name":"sin_x","coord":1}}
  //   {"runint": "x"}  {"runint": {"poly": [...]}}
  //   {"sum": [expr, ...]}  {"prod": [expr, ...]}  {"compose": ["sq", expr]}
  static Functional from_json_text(const std::string& json_text);
  // Short names for the CLI: x, x2, x3, tx, sin_x, runint_x, x_runint_x, ...
  static Functional from_spec(const std::string& spec);
  std::string to_json_text() const;

 private:
  NodePtr root_;
};

Functional operator+(Functional a, Functional b);
Functional operator*(Functional a, Functional b);

// Binds a functional to a path and answers pointwise queries in O(tree) after
// an O(M) precomputation per running-integral leaf.  `integral_path`, when
// given, supplies the history that running integrals read (used for Riemann
// sums along a piecewise-constant approximation); the state argument at the
// evaluation time always comes from `state_path`.
class Evaluator {
 public:
  Evaluator(const Functional& f, const SampledPath& state_path,
            const SampledPath* integral_path = nullptr);
  // Paths are held by reference and must outlive the evaluator.
  Evaluator(const Functional&, SampledPath&&, const SampledPath* = nullptr) = delete;

  const SampledPath& path() const { return *state_; }

  double value(std::size_t k) const;
  // Vertical derivatives; `out` must hold dim / dim^2 / dim^3 doubles.
  void jet(std::size_t k, int order, Jet& out) const;
  double horizontal(std::size_t k, bool* right_boundary = nullptr) const;
  // F(t_k + h, path frozen at t_k); the frozen tail is handled in closed form.
  double frozen_value(std::size_t k, double h) const;
  // Value with the state row at t_k replaced by `state` (dim doubles).
  double value_with_state(std::size_t k, const double* state) const;

 private:
  NodePtr root_;  // shared ownership: the functional may be a temporary
  const SampledPath* state_;
  const SampledPath* integral_;
  std::unordered_map<const FunctionalNode*, std::vector<double>> prefixes_;
};

// ---- spec-signature convenience wrappers (snap t to the grid) -------------

double eval(const Functional& f, const SampledPath& path, double t);
std::vector<double> vertical_grad(const Functional& f, const SampledPath& path, double t);
std::vector<double> vertical_hess(const Functional& f, const SampledPath& path, double t);
std::vector<double> vertical_third(const Functional& f, const SampledPath& path, double t);
double horizontal_deriv(const Functional& f, const SampledPath& path, double t,
                        bool* right_boundary = nullptr);

// Default finite-difference step 1e-5 * (1 + |omega(t)|).
double default_fd_step(const SampledPath& path, std::size_t k);

// Central difference of the state bump at t; warns (flag) when h is within
// 1e3 machine epsilons of the value scale.
std::vector<double> fd_vertical(const Functional& f, const SampledPath& path, double t, double h = 0.0,
                                bool* step_warning = nullptr);
// Forward difference of F(t+h, omega_t) on the frozen path.
double fd_horizontal(const Functional& f, const SampledPath& path, double t, double h = 0.0,
                     bool* step_warning = nullptr);

// ---- assumption estimates -------------------------------------------------

struct AssumptionReport {
  double lipschitz_K_hat = 0.0;
  double horiz_lipschitz_C_hat = 0.0;
  std::vector<std::pair<int, double>> foscill_max;  // per partition level
  std::vector<std::pair<int, double>> osc;          // path oscillation per level
  int samples_used = 0;
};

struct AssumptionCheckConfig {
  int pairs = 256;           // perturbed path pairs for the K estimate
  int times_per_pair = 8;    // sampled times per pair (the running-max time is added)
  int horizontal_samples = 256;
  double horizontal_h_max = 0.1;
  std::uint64_t seed = 0x5eed;
};

// K-hat: max ratio |F(t,omega) - F(t,omega')| / ||omega_t - omega'_t||_inf over
// sampled bounded perturbation fields.  C-hat: max |F(t+h, omega_t) - F(t,
// omega_t)| / h over sampled (t, h).  foscill_max: per level, the largest
// increment |F(t_{i+1}, omega_{t_{i+1}}) - F(t_i, omega_{t_i})|.
AssumptionReport check_assumptions(const Functional& f, const SampledPath& path,
                                   const PartitionSequence& seq,
                                   const AssumptionCheckConfig& cfg = {});

// Largest functional increment along one partition level.
double functional_oscillation(const Evaluator& ev, const Partition& partition);

}  // namespace fqv
