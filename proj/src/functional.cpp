#include "fqv/functional.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fqv/errors.hpp"
#include "fqv/rng.hpp"
#include "json.hpp"

namespace fqv {

void Jet::reset(int d, int ord) {
  dim = d;
  order = ord;
  v = 0.0;
  grad.assign(ord >= 1 ? static_cast<std::size_t>(d) : 0, 0.0);
  hess.assign(ord >= 2 ? static_cast<std::size_t>(d) * d : 0, 0.0);
  third.assign(ord >= 3 ? static_cast<std::size_t>(d) * d * d : 0, 0.0);
}

// ---- scalar maps ----------------------------------------------------------

double ScalarMap::value(double u) const {
  if (kind == Kind::sine) return std::sin(frequency * u);
  double acc = 0.0;
  for (std::size_t j = coeffs.size(); j-- > 0;) acc = acc * u + coeffs[j];
  return acc;
}

double ScalarMap::d1(double u) const {
  if (kind == Kind::sine) return frequency * std::cos(frequency * u);
  double acc = 0.0;
  for (std::size_t j = coeffs.size(); j-- > 1;) acc = acc * u + static_cast<double>(j) * coeffs[j];
  return acc;
}

double ScalarMap::d2(double u) const {
  if (kind == Kind::sine) return -frequency * frequency * std::sin(frequency * u);
  double acc = 0.0;
  for (std::size_t j = coeffs.size(); j-- > 2;)
    acc = acc * u + static_cast<double>(j) * static_cast<double>(j - 1) * coeffs[j];
  return acc;
}

double ScalarMap::d3(double u) const {
  if (kind == Kind::sine) return -frequency * frequency * frequency * std::cos(frequency * u);
  double acc = 0.0;
  for (std::size_t j = coeffs.size(); j-- > 3;)
    acc = acc * u +
          static_cast<double>(j) * static_cast<double>(j - 1) * static_cast<double>(j - 2) * coeffs[j];
  return acc;
}

std::string ScalarMap::describe() const {
  if (kind == Kind::sine) {
    std::ostringstream os;
    os << "sin(" << frequency << "u)";
    return os.str();
  }
  std::ostringstream os;
  os << "poly(";
  for (std::size_t j = 0; j < coeffs.size(); ++j) {
    if (j) os << ',';
    os << coeffs[j];
  }
  os << ')';
  return os.str();
}

// ---- expression nodes -----------------------------------------------------

namespace {

struct EvalCtx {
  const SampledPath* state = nullptr;
  const SampledPath* integral = nullptr;
  const std::unordered_map<const FunctionalNode*, std::vector<double>>* prefixes = nullptr;
  std::size_t k = 0;
  const double* override_state = nullptr;  // replaces state row at k when set
};

}  // namespace

class FunctionalNode {
 public:
  virtual ~FunctionalNode() = default;
  virtual void jet(const EvalCtx& ctx, int order, Jet& out) const = 0;
  virtual double horizontal(const EvalCtx& ctx) const = 0;
  virtual double frozen(const EvalCtx& ctx, double h) const = 0;
  virtual int state_order() const = 0;
  virtual bool horizontal_zero() const = 0;
  virtual void collect_integrals(std::vector<const FunctionalNode*>& out) const = 0;
  // Fills `prefix` (size M+1) with left-endpoint partial sums over `path`.
  virtual void integral_prefix(const SampledPath&, std::vector<double>&) const {}
  virtual void describe(std::ostream& os) const = 0;
  virtual nlohmann::json to_json() const = 0;
};

namespace {

const double* state_row(const EvalCtx& ctx) {
  return ctx.override_state != nullptr ? ctx.override_state : ctx.state->row(ctx.k);
}

class CylNode final : public FunctionalNode {
 public:
  explicit CylNode(Functional::CylSpec spec) : spec_(std::move(spec)) {
    if (spec_.coord < 0) throw ParameterError("cylindrical leaf: negative coordinate");
    if (spec_.max_order < 0 || spec_.max_order > 3)
      throw ParameterError("cylindrical leaf: max_order must be 0..3");
  }

  void jet(const EvalCtx& ctx, int order, Jet& out) const override {
    if (order > spec_.max_order)
      throw CapabilityError("vertical derivative of order " + std::to_string(order) +
                            " requested from a leaf advertising order " +
                            std::to_string(spec_.max_order));
    const int d = ctx.state->dim();
    if (spec_.coord >= d) throw ParameterError("cylindrical leaf coordinate exceeds path dimension");
    out.reset(d, order);
    const double u = state_row(ctx)[spec_.coord];
    const double w = spec_.time_weighted ? ctx.state->time(ctx.k) : 1.0;
    const int c = spec_.coord;
    out.v = w * spec_.map.value(u);
    if (order >= 1) out.grad[c] = w * spec_.map.d1(u);
    if (order >= 2) out.hess[static_cast<std::size_t>(c) * d + c] = w * spec_.map.d2(u);
    if (order >= 3)
      out.third[(static_cast<std::size_t>(c) * d + c) * d + c] = w * spec_.map.d3(u);
  }

  double horizontal(const EvalCtx& ctx) const override {
    if (!spec_.time_weighted) return 0.0;
    return spec_.map.value(state_row(ctx)[spec_.coord]);
  }

  double frozen(const EvalCtx& ctx, double h) const override {
    const double u = state_row(ctx)[spec_.coord];
    const double w = spec_.time_weighted ? ctx.state->time(ctx.k) + h : 1.0;
    return w * spec_.map.value(u);
  }

  int state_order() const override { return spec_.max_order; }
  bool horizontal_zero() const override { return !spec_.time_weighted; }
  void collect_integrals(std::vector<const FunctionalNode*>&) const override {}

  void describe(std::ostream& os) const override {
    if (spec_.time_weighted) os << "t*";
    os << spec_.map.describe() << "[x" << spec_.coord << "]";
  }

  nlohmann::json to_json() const override {
    nlohmann::json leaf;
    if (spec_.map.kind == ScalarMap::Kind::sine) {
      leaf["sin"] = spec_.map.frequency;
    } else {
      leaf["poly"] = spec_.map.coeffs;
    }
    if (spec_.coord != 0) leaf["coord"] = spec_.coord;
    if (spec_.time_weighted) leaf["time_weighted"] = true;
    if (spec_.max_order != 3) leaf["max_order"] = spec_.max_order;
    return nlohmann::json{{"cyl", leaf}};
  }

  const Functional::CylSpec& spec() const { return spec_; }

 private:
  Functional::CylSpec spec_;
};

class RunintNode final : public FunctionalNode {
 public:
  RunintNode(ScalarMap g, int coord) : g_(std::move(g)), coord_(coord) {
    if (coord_ < 0) throw ParameterError("running integral: negative coordinate");
  }

  void jet(const EvalCtx& ctx, int order, Jet& out) const override {
    out.reset(ctx.state->dim(), order);
    out.v = prefix_at(ctx);
    // The bump acts on [t, T] while the integral reads [0, t): all vertical
    // derivatives vanish.
  }

  double horizontal(const EvalCtx& ctx) const override {
    return g_.value(state_row(ctx)[coord_]);
  }

  double frozen(const EvalCtx& ctx, double h) const override {
    // Frozen tail is constant: the integral grows linearly at rate g(omega(t)).
    return prefix_at(ctx) + g_.value(state_row(ctx)[coord_]) * h;
  }

  int state_order() const override { return 3; }
  bool horizontal_zero() const override { return false; }

  void collect_integrals(std::vector<const FunctionalNode*>& out) const override {
    out.push_back(this);
  }

  void integral_prefix(const SampledPath& path, std::vector<double>& prefix) const override {
    if (coord_ >= path.dim()) throw ParameterError("running integral coordinate exceeds path dimension");
    const std::size_t M = path.grid();
    const double dt = path.dt();
    prefix.assign(M + 1, 0.0);
    double acc = 0.0;
    for (std::size_t k = 0; k < M; ++k) {
      acc += g_.value(path.value(k, coord_)) * dt;
      prefix[k + 1] = acc;
    }
  }

  void describe(std::ostream& os) const override {
    os << "runint(" << g_.describe() << "[x" << coord_ << "])";
  }

  nlohmann::json to_json() const override {
    nlohmann::json leaf;
    if (g_.kind == ScalarMap::Kind::sine) {
      leaf["sin"] = g_.frequency;
    } else {
      leaf["poly"] = g_.coeffs;
    }
    if (coord_ != 0) leaf["coord"] = coord_;
    return nlohmann::json{{"runint", leaf}};
  }

 private:
  double prefix_at(const EvalCtx& ctx) const {
    auto it = ctx.prefixes->find(this);
    if (it == ctx.prefixes->end()) throw Error("running integral evaluated without its prefix cache");
    return it->second[ctx.k];
  }

  ScalarMap g_;
  int coord_;
};

class SumNode final : public FunctionalNode {
 public:
  explicit SumNode(std::vector<NodePtr> terms) : terms_(std::move(terms)) {
    if (terms_.empty()) throw ParameterError("sum of zero functionals");
  }

  void jet(const EvalCtx& ctx, int order, Jet& out) const override {
    Jet tmp;
    terms_[0]->jet(ctx, order, out);
    for (std::size_t i = 1; i < terms_.size(); ++i) {
      terms_[i]->jet(ctx, order, tmp);
      out.v += tmp.v;
      for (std::size_t j = 0; j < out.grad.size(); ++j) out.grad[j] += tmp.grad[j];
      for (std::size_t j = 0; j < out.hess.size(); ++j) out.hess[j] += tmp.hess[j];
      for (std::size_t j = 0; j < out.third.size(); ++j) out.third[j] += tmp.third[j];
    }
  }

  double horizontal(const EvalCtx& ctx) const override {
    double acc = 0.0;
    for (const auto& t : terms_) acc += t->horizontal(ctx);
    return acc;
  }

  double frozen(const EvalCtx& ctx, double h) const override {
    double acc = 0.0;
    for (const auto& t : terms_) acc += t->frozen(ctx, h);
    return acc;
  }

  int state_order() const override {
    int o = 3;
    for (const auto& t : terms_) o = std::min(o, t->state_order());
    return o;
  }

  bool horizontal_zero() const override {
    return std::all_of(terms_.begin(), terms_.end(),
                       [](const NodePtr& t) { return t->horizontal_zero(); });
  }

  void collect_integrals(std::vector<const FunctionalNode*>& out) const override {
    for (const auto& t : terms_) t->collect_integrals(out);
  }

  void describe(std::ostream& os) const override {
    os << '(';
    for (std::size_t i = 0; i < terms_.size(); ++i) {
      if (i) os << " + ";
      terms_[i]->describe(os);
    }
    os << ')';
  }

  nlohmann::json to_json() const override {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : terms_) arr.push_back(t->to_json());
    return nlohmann::json{{"sum", arr}};
  }

 private:
  std::vector<NodePtr> terms_;
};

class ProdNode final : public FunctionalNode {
 public:
  ProdNode(NodePtr a, NodePtr b) : a_(std::move(a)), b_(std::move(b)) {}

  void jet(const EvalCtx& ctx, int order, Jet& out) const override {
    Jet ja, jb;
    a_->jet(ctx, order, ja);
    b_->jet(ctx, order, jb);
    const int d = ja.dim;
    out.reset(d, order);
    out.v = ja.v * jb.v;
    if (order >= 1)
      for (int i = 0; i < d; ++i) out.grad[i] = ja.grad[i] * jb.v + ja.v * jb.grad[i];
    if (order >= 2)
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          const std::size_t ij = static_cast<std::size_t>(i) * d + j;
          out.hess[ij] = ja.hess[ij] * jb.v + ja.grad[i] * jb.grad[j] + ja.grad[j] * jb.grad[i] +
                         ja.v * jb.hess[ij];
        }
    if (order >= 3)
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
          for (int l = 0; l < d; ++l) {
            const std::size_t ij = static_cast<std::size_t>(i) * d + j;
            const std::size_t il = static_cast<std::size_t>(i) * d + l;
            const std::size_t jl = static_cast<std::size_t>(j) * d + l;
            const std::size_t ijl = (static_cast<std::size_t>(i) * d + j) * d + l;
            out.third[ijl] = ja.third[ijl] * jb.v + ja.hess[ij] * jb.grad[l] +
                             ja.hess[il] * jb.grad[j] + ja.hess[jl] * jb.grad[i] +
                             ja.grad[i] * jb.hess[jl] + ja.grad[j] * jb.hess[il] +
                             ja.grad[l] * jb.hess[ij] + ja.v * jb.third[ijl];
          }
  }

  double horizontal(const EvalCtx& ctx) const override {
    Jet ja, jb;
    a_->jet(ctx, 0, ja);
    b_->jet(ctx, 0, jb);
    return a_->horizontal(ctx) * jb.v + ja.v * b_->horizontal(ctx);
  }

  double frozen(const EvalCtx& ctx, double h) const override {
    return a_->frozen(ctx, h) * b_->frozen(ctx, h);
  }

  int state_order() const override { return std::min(a_->state_order(), b_->state_order()); }
  bool horizontal_zero() const override { return a_->horizontal_zero() && b_->horizontal_zero(); }

  void collect_integrals(std::vector<const FunctionalNode*>& out) const override {
    a_->collect_integrals(out);
    b_->collect_integrals(out);
  }

  void describe(std::ostream& os) const override {
    os << '(';
    a_->describe(os);
    os << " * ";
    b_->describe(os);
    os << ')';
  }

  nlohmann::json to_json() const override {
    return nlohmann::json{{"prod", nlohmann::json::array({a_->to_json(), b_->to_json()})}};
  }

 private:
  NodePtr a_;
  NodePtr b_;
};

// phi and three derivatives for the composition library.
struct Phi {
  const char* name;
  double (*f0)(double);
  double (*f1)(double);
  double (*f2)(double);
  double (*f3)(double);
};

const Phi kPhiTable[] = {
    {"sq", [](double u) { return u * u; }, [](double u) { return 2.0 * u; },
     [](double) { return 2.0; }, [](double) { return 0.0; }},
    {"cube", [](double u) { return u * u * u; }, [](double u) { return 3.0 * u * u; },
     [](double u) { return 6.0 * u; }, [](double) { return 6.0; }},
    {"sin", [](double u) { return std::sin(u); }, [](double u) { return std::cos(u); },
     [](double u) { return -std::sin(u); }, [](double u) { return -std::cos(u); }},
    {"exp", [](double u) { return std::exp(u); }, [](double u) { return std::exp(u); },
     [](double u) { return std::exp(u); }, [](double u) { return std::exp(u); }},
};

const Phi& phi_by_name(const std::string& name) {
  for (const Phi& p : kPhiTable)
    if (name == p.name) return p;
  throw ParameterError("unknown composition map: " + name + " (have sq, cube, sin, exp)");
}

class ComposeNode final : public FunctionalNode {
 public:
  ComposeNode(const Phi& phi, NodePtr inner) : phi_(&phi), inner_(std::move(inner)) {}

  void jet(const EvalCtx& ctx, int order, Jet& out) const override {
    Jet ji;
    inner_->jet(ctx, order, ji);
    const int d = ji.dim;
    out.reset(d, order);
    const double p0 = phi_->f0(ji.v);
    out.v = p0;
    if (order == 0) return;
    const double p1 = phi_->f1(ji.v);
    if (order >= 1)
      for (int i = 0; i < d; ++i) out.grad[i] = p1 * ji.grad[i];
    if (order >= 2) {
      const double p2 = phi_->f2(ji.v);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          const std::size_t ij = static_cast<std::size_t>(i) * d + j;
          out.hess[ij] = p2 * ji.grad[i] * ji.grad[j] + p1 * ji.hess[ij];
        }
      if (order >= 3) {
        const double p3 = phi_->f3(ji.v);
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j)
            for (int l = 0; l < d; ++l) {
              const std::size_t ij = static_cast<std::size_t>(i) * d + j;
              const std::size_t il = static_cast<std::size_t>(i) * d + l;
              const std::size_t jl = static_cast<std::size_t>(j) * d + l;
              const std::size_t ijl = (static_cast<std::size_t>(i) * d + j) * d + l;
              out.third[ijl] = p3 * ji.grad[i] * ji.grad[j] * ji.grad[l] +
                               p2 * (ji.hess[ij] * ji.grad[l] + ji.hess[il] * ji.grad[j] +
                                     ji.hess[jl] * ji.grad[i]) +
                               p1 * ji.third[ijl];
            }
      }
    }
  }

  double horizontal(const EvalCtx& ctx) const override {
    Jet ji;
    inner_->jet(ctx, 0, ji);
    return phi_->f1(ji.v) * inner_->horizontal(ctx);
  }

  double frozen(const EvalCtx& ctx, double h) const override {
    return phi_->f0(inner_->frozen(ctx, h));
  }

  int state_order() const override { return inner_->state_order(); }
  bool horizontal_zero() const override { return inner_->horizontal_zero(); }

  void collect_integrals(std::vector<const FunctionalNode*>& out) const override {
    inner_->collect_integrals(out);
  }

  void describe(std::ostream& os) const override {
    os << phi_->name << '(';
    inner_->describe(os);
    os << ')';
  }

  nlohmann::json to_json() const override {
    return nlohmann::json{{"compose", nlohmann::json::array({phi_->name, inner_->to_json()})}};
  }

 private:
  const Phi* phi_;
  NodePtr inner_;
};

ScalarMap named_scalar_map(const std::string& name) {
  ScalarMap m;
  if (name == "x") {
    m.coeffs = {0.0, 1.0};
  } else if (name == "x2") {
    m.coeffs = {0.0, 0.0, 1.0};
  } else if (name == "x3") {
    m.coeffs = {0.0, 0.0, 0.0, 1.0};
  } else if (name == "one") {
    m.coeffs = {1.0};
  } else if (name == "sin_x") {
    m.kind = ScalarMap::Kind::sine;
    m.frequency = 1.0;
  } else {
    throw ParameterError("unknown scalar map: " + name + " (have x, x2, x3, one, sin_x)");
  }
  return m;
}

}  // namespace

// ---- Functional -----------------------------------------------------------

Functional::Functional(NodePtr root) : root_(std::move(root)) {}

int Functional::state_order() const {
  if (!root_) throw ParameterError("empty functional");
  return root_->state_order();
}

bool Functional::horizontal_is_zero() const {
  if (!root_) throw ParameterError("empty functional");
  return root_->horizontal_zero();
}

std::string Functional::describe() const {
  if (!root_) return "<empty>";
  std::ostringstream os;
  root_->describe(os);
  return os.str();
}

Functional Functional::cylinder(const CylSpec& spec) {
  return Functional(std::make_shared<CylNode>(spec));
}

Functional Functional::cylinder(const std::string& name) {
  CylSpec spec;
  if (name == "tx") {
    spec.time_weighted = true;
    spec.map = named_scalar_map("x");
  } else {
    spec.map = named_scalar_map(name);
  }
  return cylinder(spec);
}

Functional Functional::running_integral(const ScalarMap& g, int coord) {
  return Functional(std::make_shared<RunintNode>(g, coord));
}

Functional Functional::running_integral(const std::string& gname) {
  return running_integral(named_scalar_map(gname), 0);
}

Functional Functional::sum(std::vector<Functional> terms) {
  std::vector<NodePtr> nodes;
  nodes.reserve(terms.size());
  for (auto& t : terms) {
    if (t.empty()) throw ParameterError("sum over an empty functional");
    nodes.push_back(t.root());
  }
  return Functional(std::make_shared<SumNode>(std::move(nodes)));
}

Functional Functional::product(Functional a, Functional b) {
  if (a.empty() || b.empty()) throw ParameterError("product with an empty functional");
  return Functional(std::make_shared<ProdNode>(a.root(), b.root()));
}

Functional Functional::compose(const std::string& phi_name, Functional inner) {
  if (inner.empty()) throw ParameterError("composition over an empty functional");
  return Functional(std::make_shared<ComposeNode>(phi_by_name(phi_name), inner.root()));
}

Functional operator+(Functional a, Functional b) {
  return Functional::sum({std::move(a), std::move(b)});
}

Functional operator*(Functional a, Functional b) {
  return Functional::product(std::move(a), std::move(b));
}

// ---- JSON grammar ---------------------------------------------------------

namespace {

using nlohmann::json;

ScalarMap scalar_map_from_json(const json& j, const std::string& where) {
  ScalarMap m;
  if (j.is_string()) return named_scalar_map(j.get<std::string>());
  if (!j.is_object()) throw ConfigError(where, "expected a name or an object");
  if (j.contains("name")) return named_scalar_map(j.at("name").get<std::string>());
  if (j.contains("poly")) {
    if (!j.at("poly").is_array() || j.at("poly").empty())
      throw ConfigError(where + ".poly", "expected a non-empty coefficient array");
    m.kind = ScalarMap::Kind::poly;
    m.coeffs = j.at("poly").get<std::vector<double>>();
  } else if (j.contains("sin")) {
    m.kind = ScalarMap::Kind::sine;
    m.frequency = j.at("sin").get<double>();
  } else {
    throw ConfigError(where, "expected one of: name, poly, sin");
  }
  return m;
}

Functional parse_expr(const json& j, const std::string& where) {
  if (!j.is_object() || j.size() != 1)
    throw ConfigError(where, "expected an object with exactly one of cyl/runint/sum/prod/compose");
  if (j.contains("cyl")) {
    const json& leaf = j.at("cyl");
    if (leaf.is_string()) return Functional::cylinder(leaf.get<std::string>());
    Functional::CylSpec spec;
    spec.map = scalar_map_from_json(leaf, where + ".cyl");
    if (leaf.is_object()) {
      if (leaf.contains("coord")) spec.coord = leaf.at("coord").get<int>();
      if (leaf.contains("time_weighted")) spec.time_weighted = leaf.at("time_weighted").get<bool>();
      if (leaf.contains("max_order")) spec.max_order = leaf.at("max_order").get<int>();
      if (leaf.is_object() && leaf.contains("name") && leaf.at("name") == "tx") spec.time_weighted = true;
    }
    return Functional::cylinder(spec);
  }
  if (j.contains("runint")) {
    const json& leaf = j.at("runint");
    ScalarMap g = scalar_map_from_json(leaf, where + ".runint");
    int coord = 0;
    if (leaf.is_object() && leaf.contains("coord")) coord = leaf.at("coord").get<int>();
    return Functional::running_integral(g, coord);
  }
  if (j.contains("sum")) {
    const json& arr = j.at("sum");
    if (!arr.is_array() || arr.empty()) throw ConfigError(where + ".sum", "expected a non-empty array");
    std::vector<Functional> terms;
    for (std::size_t i = 0; i < arr.size(); ++i)
      terms.push_back(parse_expr(arr[i], where + ".sum[" + std::to_string(i) + "]"));
    return Functional::sum(std::move(terms));
  }
  if (j.contains("prod")) {
    const json& arr = j.at("prod");
    if (!arr.is_array() || arr.size() < 2)
      throw ConfigError(where + ".prod", "expected an array of at least two factors");
    Functional acc = parse_expr(arr[0], where + ".prod[0]");
    for (std::size_t i = 1; i < arr.size(); ++i)
      acc = Functional::product(std::move(acc), parse_expr(arr[i], where + ".prod[" + std::to_string(i) + "]"));
    return acc;
  }
  if (j.contains("compose")) {
    const json& arr = j.at("compose");
    if (!arr.is_array() || arr.size() != 2 || !arr[0].is_string())
      throw ConfigError(where + ".compose", "expected [phi_name, expression]");
    return Functional::compose(arr[0].get<std::string>(), parse_expr(arr[1], where + ".compose[1]"));
  }
  throw ConfigError(where, "unknown node; expected cyl/runint/sum/prod/compose");
}

}  // namespace

Functional Functional::from_json_text(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("functional", std::string("invalid JSON: ") + e.what());
  }
  return parse_expr(j, "functional");
}

std::string Functional::to_json_text() const {
  if (!root_) throw ParameterError("empty functional");
  return root_->to_json().dump();
}

Functional Functional::from_spec(const std::string& spec) {
  if (!spec.empty() && spec.front() == '{') return from_json_text(spec);
  if (spec == "identity" || spec == "x") return cylinder("x");
  if (spec == "x2" || spec == "x3" || spec == "tx" || spec == "sin_x") return cylinder(spec);
  if (spec == "runint_x") return running_integral("x");
  if (spec == "runint_x2") return running_integral("x2");
  if (spec == "runint_sin_x") return running_integral("sin_x");
  if (spec == "x_runint_x") return cylinder("x") * running_integral("x");
  if (spec == "sin_of_x2") return compose("sin", cylinder("x2"));
  if (spec == "exp_of_x") return compose("exp", cylinder("x"));
  if (spec.rfind("poly:", 0) == 0) {
    ScalarMap m;
    m.coeffs.clear();
    std::stringstream ss(spec.substr(5));
    std::string tok;
    while (std::getline(ss, tok, ','))
      m.coeffs.push_back(std::strtod(tok.c_str(), nullptr));
    if (m.coeffs.empty()) throw ParameterError("poly: needs coefficients");
    CylSpec cs;
    cs.map = m;
    return cylinder(cs);
  }
  throw ParameterError("unknown functional spec: " + spec +
                       " (have x, x2, x3, tx, sin_x, runint_x, runint_x2, runint_sin_x, "
                       "x_runint_x, sin_of_x2, exp_of_x, poly:..., or a JSON expression)");
}

// ---- Evaluator ------------------------------------------------------------

Evaluator::Evaluator(const Functional& f, const SampledPath& state_path,
                     const SampledPath* integral_path)
    : root_(f.root()), state_(&state_path), integral_(integral_path ? integral_path : &state_path) {
  if (f.empty()) throw ParameterError("empty functional");
  if (integral_->grid() != state_->grid() || integral_->dim() != state_->dim())
    throw ParameterError("integral path must share the state path's grid and dimension");
  std::vector<const FunctionalNode*> nodes;
  f.root()->collect_integrals(nodes);
  for (const FunctionalNode* node : nodes) {
    auto [it, fresh] = prefixes_.try_emplace(node);
    if (fresh) node->integral_prefix(*integral_, it->second);
  }
}

double Evaluator::value(std::size_t k) const {
  EvalCtx ctx{state_, integral_, &prefixes_, k, nullptr};
  Jet out;
  root_->jet(ctx, 0, out);
  return out.v;
}

void Evaluator::jet(std::size_t k, int order, Jet& out) const {
  if (order < 0 || order > 3) throw ParameterError("jet order must be 0..3");
  EvalCtx ctx{state_, integral_, &prefixes_, k, nullptr};
  root_->jet(ctx, order, out);
}

double Evaluator::horizontal(std::size_t k, bool* right_boundary) const {
  if (right_boundary != nullptr) *right_boundary = (k == state_->grid());
  EvalCtx ctx{state_, integral_, &prefixes_, k, nullptr};
  return root_->horizontal(ctx);
}

double Evaluator::frozen_value(std::size_t k, double h) const {
  if (h < 0.0) throw ParameterError("frozen_value: h must be nonnegative");
  EvalCtx ctx{state_, integral_, &prefixes_, k, nullptr};
  return root_->frozen(ctx, h);
}

double Evaluator::value_with_state(std::size_t k, const double* state) const {
  EvalCtx ctx{state_, integral_, &prefixes_, k, state};
  Jet out;
  root_->jet(ctx, 0, out);
  return out.v;
}

// ---- convenience wrappers -------------------------------------------------

double eval(const Functional& f, const SampledPath& path, double t) {
  Evaluator ev(f, path);
  return ev.value(path.snap(t));
}

std::vector<double> vertical_grad(const Functional& f, const SampledPath& path, double t) {
  Evaluator ev(f, path);
  Jet j;
  ev.jet(path.snap(t), 1, j);
  return j.grad;
}

std::vector<double> vertical_hess(const Functional& f, const SampledPath& path, double t) {
  Evaluator ev(f, path);
  Jet j;
  ev.jet(path.snap(t), 2, j);
  return j.hess;
}

std::vector<double> vertical_third(const Functional& f, const SampledPath& path, double t) {
  Evaluator ev(f, path);
  Jet j;
  ev.jet(path.snap(t), 3, j);
  return j.third;
}

double horizontal_deriv(const Functional& f, const SampledPath& path, double t, bool* right_boundary) {
  Evaluator ev(f, path);
  return ev.horizontal(path.snap(t), right_boundary);
}

double default_fd_step(const SampledPath& path, std::size_t k) {
  double amp = 0.0;
  for (int c = 0; c < path.dim(); ++c) amp = std::max(amp, std::abs(path.value(k, c)));
  return 1e-5 * (1.0 + amp);
}

namespace {

bool step_too_small(const SampledPath& path, std::size_t k, double h) {
  double amp = 0.0;
  for (int c = 0; c < path.dim(); ++c) amp = std::max(amp, std::abs(path.value(k, c)));
  return h < 1e3 * std::numeric_limits<double>::epsilon() * (1.0 + amp);
}

}  // namespace

std::vector<double> fd_vertical(const Functional& f, const SampledPath& path, double t, double h,
                                bool* step_warning) {
  Evaluator ev(f, path);
  const std::size_t k = path.snap(t);
  if (h <= 0.0) h = default_fd_step(path, k);
  if (step_warning != nullptr) *step_warning = step_too_small(path, k, h);
  const int d = path.dim();
  std::vector<double> bumped(path.row(k), path.row(k) + d);
  std::vector<double> grad(d);
  for (int c = 0; c < d; ++c) {
    const double base = bumped[c];
    bumped[c] = base + h;
    const double up = ev.value_with_state(k, bumped.data());
    bumped[c] = base - h;
    const double dn = ev.value_with_state(k, bumped.data());
    bumped[c] = base;
    grad[c] = (up - dn) / (2.0 * h);
  }
  return grad;
}

double fd_horizontal(const Functional& f, const SampledPath& path, double t, double h,
                     bool* step_warning) {
  Evaluator ev(f, path);
  const std::size_t k = path.snap(t);
  if (h <= 0.0) h = default_fd_step(path, k);
  if (step_warning != nullptr) *step_warning = step_too_small(path, k, h);
  return (ev.frozen_value(k, h) - ev.value(k)) / h;
}

// ---- assumption estimates -------------------------------------------------

double functional_oscillation(const Evaluator& ev, const Partition& partition) {
  double worst = 0.0;
  double prev = ev.value(partition.indices[0]);
  for (std::size_t i = 1; i < partition.indices.size(); ++i) {
    const double cur = ev.value(partition.indices[i]);
    worst = std::max(worst, std::abs(cur - prev));
    prev = cur;
  }
  return worst;
}

AssumptionReport check_assumptions(const Functional& f, const SampledPath& path,
                                   const PartitionSequence& seq, const AssumptionCheckConfig& cfg) {
  AssumptionReport report;
  const std::size_t M = path.grid();
  const int d = path.dim();
  Evaluator base(f, path);

  // K-hat over bounded perturbation fields.
  int samples = 0;
  double k_hat = 0.0;
  for (int p = 0; p < cfg.pairs; ++p) {
    const std::uint64_t field_key = rng::stream_key(cfg.seed, 1000 + static_cast<std::uint64_t>(p));
    const std::uint64_t time_key = rng::stream_key(cfg.seed, 500000 + static_cast<std::uint64_t>(p));
    SampledPath perturbed = path;
    auto data = perturbed.mutable_data();
    std::vector<double> runmax(M + 1, 0.0);
    double peak = 0.0;
    std::size_t peak_at = 0;
    for (std::size_t k = 0; k <= M; ++k) {
      double amp = 0.0;
      for (int c = 0; c < d; ++c) {
        const double bump = rng::symmetric(field_key, k * static_cast<std::size_t>(d) + c);
        data[k * d + c] += bump;
        amp = std::max(amp, std::abs(bump));
      }
      if (amp > peak) {
        peak = amp;
        peak_at = k;
      }
      runmax[k] = peak;
    }
    Evaluator other(f, perturbed);
    auto probe = [&](std::size_t k) {
      const double den = runmax[k];
      if (den < 1e-12) return;
      const double num = std::abs(base.value(k) - other.value(k));
      k_hat = std::max(k_hat, num / den);
      ++samples;
    };
    probe(peak_at);
    for (int s = 0; s < cfg.times_per_pair; ++s)
      probe(rng::below(time_key, static_cast<std::uint64_t>(s), M + 1));
  }
  report.lipschitz_K_hat = k_hat;

  // C-hat over frozen-path time steps.
  const std::uint64_t horiz_key = rng::stream_key(cfg.seed, 777);
  const double dt = path.dt();
  double c_hat = 0.0;
  for (int s = 0; s < cfg.horizontal_samples; ++s) {
    const std::size_t k = rng::below(horiz_key, 2 * static_cast<std::uint64_t>(s), M);
    const double upper = std::min(cfg.horizontal_h_max, path.horizon() - path.time(k));
    double h = dt;
    if (upper > dt) {
      const double u = rng::u01(horiz_key, 2 * static_cast<std::uint64_t>(s) + 1);
      h = dt * std::exp(u * std::log(upper / dt));
    }
    const double num = std::abs(base.frozen_value(k, h) - base.value(k));
    c_hat = std::max(c_hat, num / h);
    ++samples;
  }
  report.horiz_lipschitz_C_hat = c_hat;
  report.samples_used = samples;

  for (const auto& [n, partition] : seq.levels) {
    report.foscill_max.emplace_back(n, functional_oscillation(base, partition));
    report.osc.emplace_back(n, oscillation(path, partition));
  }
  return report;
}

}  // namespace fqv
