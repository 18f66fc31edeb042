#include "permin/adgraph.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace permin::ad {

NdArray::NdArray(std::vector<std::size_t> shape_, std::vector<double> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  if (n != data.size())
    throw Error("NdArray: shape does not match data length");
}

NdArray NdArray::scalar(double v) { return NdArray({}, {v}); }

NdArray NdArray::zeros_like(const NdArray& other) {
  return NdArray(other.shape, std::vector<double>(other.data.size(), 0.0));
}

NdArray NdArray::from_field(const Field& f) {
  return NdArray(f.dims(), f.data());
}

Field NdArray::to_field(const std::vector<double>& spacing,
                        const std::vector<double>& origin) const {
  std::vector<double> h = spacing.empty() ? std::vector<double>(shape.size(), 1.0) : spacing;
  Field f(shape, h, origin);
  f.data() = data;
  return f;
}

const NdArray& SlotValue::array() const {
  if (!is_array_) throw Error("SlotValue: opaque slot accessed as array");
  return array_;
}

const std::any& SlotValue::opaque() const {
  if (is_array_) throw Error("SlotValue: array slot accessed as opaque");
  return opaque_;
}

// ---------------------------------------------------------------------------
// Rule registry.

namespace {

std::map<std::string, PullbackRule>& registry() {
  static std::map<std::string, PullbackRule> rules;
  return rules;
}

std::mutex& registry_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

void register_rule(PullbackRule rule) {
  std::lock_guard<std::mutex> lock(registry_mutex());
  auto [it, inserted] = registry().emplace(rule.name, rule);
  (void)it;
  if (!inserted)
    throw Error("register_rule: duplicate rule name \"" + rule.name + "\"");
}

bool has_rule(const std::string& name) {
  std::lock_guard<std::mutex> lock(registry_mutex());
  return registry().count(name) > 0;
}

const PullbackRule& get_rule(const std::string& name) {
  std::lock_guard<std::mutex> lock(registry_mutex());
  auto it = registry().find(name);
  if (it == registry().end())
    throw Error("no pullback rule registered for operation \"" + name + "\"");
  return it->second;
}

// ---------------------------------------------------------------------------
// Tape.

Arg Arg::opaque(std::any value) {
  Arg a;
  a.any_ = std::move(value);
  return a;
}

int Tape::record(Node node) {
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
    throw Error("Tape: invalid Var handle");
  return nodes_[static_cast<std::size_t>(v.id)];
}

Var Tape::input(NdArray value) {
  return Var{record({Node::Kind::Input, "input", {}, std::move(value), 0.0, {}})};
}

Var Tape::constant(NdArray value) {
  return Var{record({Node::Kind::Constant, "constant", {}, std::move(value), 0.0, {}})};
}

namespace {

void check_same_shape(const NdArray& a, const NdArray& b, const char* op) {
  if (a.shape != b.shape)
    throw Error(std::string(op) + ": shape mismatch");
}

}  // namespace

Var Tape::add(Var a, Var b) {
  const auto& va = node(a).value;
  const auto& vb = node(b).value;
  check_same_shape(va, vb, "add");
  NdArray out = va;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += vb.data[i];
  return Var{record({Node::Kind::Builtin, "add", {a.id, b.id}, std::move(out), 0.0, {}})};
}

Var Tape::sub(Var a, Var b) {
  const auto& va = node(a).value;
  const auto& vb = node(b).value;
  check_same_shape(va, vb, "sub");
  NdArray out = va;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= vb.data[i];
  return Var{record({Node::Kind::Builtin, "sub", {a.id, b.id}, std::move(out), 0.0, {}})};
}

Var Tape::mul(Var a, Var b) {
  const auto& va = node(a).value;
  const auto& vb = node(b).value;
  check_same_shape(va, vb, "mul");
  NdArray out = va;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= vb.data[i];
  return Var{record({Node::Kind::Builtin, "mul", {a.id, b.id}, std::move(out), 0.0, {}})};
}

Var Tape::scale(Var a, double c) {
  NdArray out = node(a).value;
  for (auto& v : out.data) v *= c;
  return Var{record({Node::Kind::Builtin, "scale", {a.id}, std::move(out), c, {}})};
}

Var Tape::norm_sq(Var a) {
  const auto& va = node(a).value;
  double s = 0.0;
  for (double v : va.data) s += v * v;
  return Var{record({Node::Kind::Builtin, "norm_sq", {a.id}, NdArray::scalar(s), 0.0, {}})};
}

Var Tape::inner_prod(Var a, Var b) {
  const auto& va = node(a).value;
  const auto& vb = node(b).value;
  check_same_shape(va, vb, "inner_prod");
  double s = 0.0;
  for (std::size_t i = 0; i < va.data.size(); ++i) s += va.data[i] * vb.data[i];
  return Var{record({Node::Kind::Builtin, "inner_prod", {a.id, b.id}, NdArray::scalar(s), 0.0, {}})};
}

Var Tape::sum(Var a) {
  const auto& va = node(a).value;
  double s = 0.0;
  for (double v : va.data) s += v;
  return Var{record({Node::Kind::Builtin, "sum", {a.id}, NdArray::scalar(s), 0.0, {}})};
}

Var Tape::pow_elem(Var a, double exponent) {
  NdArray out = node(a).value;
  for (auto& v : out.data) {
    if (v <= 0.0) throw Error("pow_elem: non-positive base");
    v = std::pow(v, exponent);
  }
  return Var{record({Node::Kind::Builtin, "pow_elem", {a.id}, std::move(out), exponent, {}})};
}

Var Tape::take(Var a, std::size_t index) {
  const auto& va = node(a).value;
  if (va.shape.empty() || index >= va.shape[0])
    throw Error("take: index out of range");
  std::vector<std::size_t> out_shape(va.shape.begin() + 1, va.shape.end());
  std::size_t block = va.size() / va.shape[0];
  NdArray out(out_shape, std::vector<double>(va.data.begin() + index * block,
                                             va.data.begin() + (index + 1) * block));
  return Var{record({Node::Kind::Builtin, "take", {a.id}, std::move(out),
                     static_cast<double>(index), {}})};
}

Var Tape::apply(const std::string& rule_name, std::vector<Arg> args) {
  const PullbackRule& rule = get_rule(rule_name);
  std::vector<SlotValue> slots;
  std::vector<int> parents;
  slots.reserve(args.size());
  parents.reserve(args.size());
  for (const auto& arg : args) {
    switch (arg.kind()) {
      case Arg::Kind::Traced:
        slots.emplace_back(node(arg.var()).value);
        parents.push_back(arg.var().id);
        break;
      case Arg::Kind::Constant:
        slots.emplace_back(arg.array());
        parents.push_back(-1);
        break;
      case Arg::Kind::Opaque:
        slots.emplace_back(arg.any());
        parents.push_back(-1);
        break;
    }
  }
  NdArray out = rule.forward(slots);
  return Var{record({Node::Kind::Rule, rule_name, std::move(parents), std::move(out),
                     0.0, std::move(slots)})};
}

const NdArray& Tape::value(Var v) const { return node(v).value; }

namespace {

void accumulate(std::optional<NdArray>& into, const NdArray& delta) {
  if (!into) {
    into = delta;
    return;
  }
  if (into->shape != delta.shape)
    throw Error("backward: cotangent shape mismatch at fan-out");
  for (std::size_t i = 0; i < into->data.size(); ++i)
    into->data[i] += delta.data[i];
}

}  // namespace

std::vector<std::optional<NdArray>> Tape::backward(Var loss, const std::vector<Var>& wrt) {
  const Node& loss_node = node(loss);
  if (!loss_node.value.is_scalar())
    throw Error("backward: loss must be a scalar");
  if (!std::isfinite(loss_node.value.scalar_value()))
    throw Error("backward: non-finite loss");

  std::vector<std::optional<NdArray>> cot(nodes_.size());
  cot[static_cast<std::size_t>(loss.id)] = NdArray::scalar(1.0);

  for (int id = loss.id; id >= 0; --id) {
    auto& maybe_dy = cot[static_cast<std::size_t>(id)];
    if (!maybe_dy) continue;
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    const NdArray& dy = *maybe_dy;

    switch (n.kind) {
      case Node::Kind::Input:
      case Node::Kind::Constant:
        break;
      case Node::Kind::Builtin: {
        if (n.op == "add") {
          accumulate(cot[n.parents[0]], dy);
          accumulate(cot[n.parents[1]], dy);
        } else if (n.op == "sub") {
          accumulate(cot[n.parents[0]], dy);
          NdArray neg = dy;
          for (auto& v : neg.data) v = -v;
          accumulate(cot[n.parents[1]], neg);
        } else if (n.op == "mul") {
          const NdArray& a = nodes_[n.parents[0]].value;
          const NdArray& b = nodes_[n.parents[1]].value;
          NdArray da = dy, db = dy;
          for (std::size_t i = 0; i < dy.data.size(); ++i) {
            da.data[i] *= b.data[i];
            db.data[i] *= a.data[i];
          }
          accumulate(cot[n.parents[0]], da);
          accumulate(cot[n.parents[1]], db);
        } else if (n.op == "scale") {
          NdArray da = dy;
          for (auto& v : da.data) v *= n.aux;
          accumulate(cot[n.parents[0]], da);
        } else if (n.op == "norm_sq") {
          const NdArray& a = nodes_[n.parents[0]].value;
          NdArray da = a;
          double c = 2.0 * dy.scalar_value();
          for (auto& v : da.data) v *= c;
          accumulate(cot[n.parents[0]], da);
        } else if (n.op == "inner_prod") {
          const NdArray& a = nodes_[n.parents[0]].value;
          const NdArray& b = nodes_[n.parents[1]].value;
          double c = dy.scalar_value();
          NdArray da = b, db = a;
          for (auto& v : da.data) v *= c;
          for (auto& v : db.data) v *= c;
          accumulate(cot[n.parents[0]], da);
          accumulate(cot[n.parents[1]], db);
        } else if (n.op == "pow_elem") {
          const NdArray& a = nodes_[n.parents[0]].value;
          NdArray da = dy;
          for (std::size_t i = 0; i < da.data.size(); ++i)
            da.data[i] *= n.aux * std::pow(a.data[i], n.aux - 1.0);
          accumulate(cot[n.parents[0]], da);
        } else if (n.op == "take") {
          const NdArray& a = nodes_[n.parents[0]].value;
          NdArray da = NdArray::zeros_like(a);
          std::size_t block = dy.data.size();
          std::size_t offset = static_cast<std::size_t>(n.aux) * block;
          for (std::size_t i = 0; i < block; ++i) da.data[offset + i] = dy.data[i];
          accumulate(cot[n.parents[0]], da);
        } else if (n.op == "sum") {
          const NdArray& a = nodes_[n.parents[0]].value;
          NdArray da = NdArray::zeros_like(a);
          double c = dy.scalar_value();
          for (auto& v : da.data) v = c;
          accumulate(cot[n.parents[0]], da);
        } else {
          throw Error("backward: unknown builtin \"" + n.op + "\"");
        }
        break;
      }
      case Node::Kind::Rule: {
        const PullbackRule& rule = get_rule(n.op);
        Cotangents parts = rule.pullback(n.slots, n.value, dy);
        if (parts.size() != n.slots.size())
          throw Error("backward: rule \"" + n.op +
                      "\" pullback returned wrong number of cotangents");
        for (std::size_t s = 0; s < parts.size(); ++s) {
          if (!parts[s]) continue;  // no-tangent slot
          int parent = n.parents[s];
          if (parent < 0) continue;  // untraced constant input
          if (parts[s]->shape != nodes_[static_cast<std::size_t>(parent)].value.shape)
            throw Error("backward: rule \"" + n.op + "\" cotangent " +
                        std::to_string(s) + " has wrong shape");
          accumulate(cot[static_cast<std::size_t>(parent)], *parts[s]);
        }
        break;
      }
    }
    // Free the cotangent once propagated, except for requested leaves.
  }

  std::vector<std::optional<NdArray>> out;
  out.reserve(wrt.size());
  for (Var v : wrt) {
    node(v);  // validates the handle
    out.push_back(cot[static_cast<std::size_t>(v.id)]);
  }
  return out;
}

GradientResult gradient(const LossFn& loss, const std::vector<NdArray>& at) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(at.size());
  for (const auto& a : at) vars.push_back(tape.input(a));
  Var out = loss(tape, vars);
  if (!tape.value(out).is_scalar()) throw Error("gradient: loss must be a scalar");
  GradientResult result;
  result.value = tape.value(out).scalar_value();
  if (!std::isfinite(result.value)) throw Error("gradient: non-finite loss");
  result.grads = tape.backward(out, vars);
  return result;
}

double value(const LossFn& loss, const std::vector<NdArray>& at) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(at.size());
  for (const auto& a : at) vars.push_back(tape.input(a));
  Var out = loss(tape, vars);
  const NdArray& v = tape.value(out);
  if (!v.is_scalar()) throw Error("value: loss must be a scalar");
  if (!std::isfinite(v.scalar_value())) throw Error("value: non-finite loss");
  return v.scalar_value();
}

}  // namespace permin::ad
