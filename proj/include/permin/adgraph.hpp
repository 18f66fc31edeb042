#pragma once

#include <any>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "permin/fieldio.hpp"

namespace permin::ad {

/// Shaped value flowing through the tape. Scalars are rank-0 (one entry).
struct NdArray {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  NdArray() = default;
  NdArray(std::vector<std::size_t> shape_, std::vector<double> data_);
  static NdArray scalar(double v);
  static NdArray zeros_like(const NdArray& other);
  static NdArray from_field(const Field& f);
  Field to_field(const std::vector<double>& spacing = {},
                 const std::vector<double>& origin = {}) const;

  std::size_t size() const { return data.size(); }
  bool is_scalar() const { return data.size() == 1; }
  double scalar_value() const { return data[0]; }
};

/// One input slot of a registered rule: either an array (potentially
/// differentiable) or an opaque context object (never differentiable).
class SlotValue {
public:
  SlotValue(NdArray array) : is_array_(true), array_(std::move(array)) {}
  SlotValue(std::any opaque) : is_array_(false), opaque_(std::move(opaque)) {}

  bool is_array() const { return is_array_; }
  const NdArray& array() const;
  const std::any& opaque() const;

private:
  bool is_array_;
  NdArray array_;
  std::any opaque_;
};

/// Per-input cotangents returned by a pullback. nullopt is the no-tangent
/// marker: the slot is declared non-differentiable, not numerically zero.
using Cotangents = std::vector<std::optional<NdArray>>;

/// User-registered reverse-mode rule: forward evaluation plus a pullback
/// mapping an output cotangent to input cotangents.
struct PullbackRule {
  std::string name;
  std::function<NdArray(const std::vector<SlotValue>&)> forward;
  std::function<Cotangents(const std::vector<SlotValue>& inputs,
                           const NdArray& primal, const NdArray& cotangent)>
      pullback;
};

/// Global write-once registry. Registering a name twice is an error.
void register_rule(PullbackRule rule);
bool has_rule(const std::string& name);
const PullbackRule& get_rule(const std::string& name);

class Tape;

/// Handle to a tape node. Only valid for the tape that created it.
struct Var {
  int id = -1;
};

/// Argument to Tape::apply: a traced variable, an untraced constant array,
/// or an opaque context object.
class Arg {
public:
  Arg(Var v) : kind_(Kind::Traced), var_(v) {}
  Arg(NdArray a) : kind_(Kind::Constant), array_(std::move(a)) {}
  static Arg opaque(std::any value);

  enum class Kind { Traced, Constant, Opaque };
  Kind kind() const { return kind_; }
  Var var() const { return var_; }
  const NdArray& array() const { return array_; }
  const std::any& any() const { return any_; }

private:
  Arg() : kind_(Kind::Opaque) {}
  Kind kind_;
  Var var_{};
  NdArray array_;
  std::any any_;
};

/// Fresh-per-evaluation reverse-mode tape. Nodes are recorded in
/// construction order; the reverse sweep visits them backwards and sums
/// cotangents at fan-out.
class Tape {
public:
  Var input(NdArray value);
  Var constant(NdArray value);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double c);
  Var norm_sq(Var a);         // sum of squares, scalar
  Var inner_prod(Var a, Var b);
  Var sum(Var a);
  Var pow_elem(Var a, double exponent);  // elementwise a^c, a > 0
  Var take(Var a, std::size_t index);    // slice along the first axis

  Var apply(const std::string& rule_name, std::vector<Arg> args);

  const NdArray& value(Var v) const;
  std::size_t num_nodes() const { return nodes_.size(); }

  /// Reverse sweep seeded at scalar `loss`. Returns one cotangent per
  /// entry of `wrt`; nullopt means no differentiable path reached it.
  std::vector<std::optional<NdArray>> backward(Var loss, const std::vector<Var>& wrt);

private:
  struct Node;
  int record(Node node);
  const Node& node(Var v) const;

  std::vector<Node> nodes_;

  struct Node {
    enum class Kind { Input, Constant, Builtin, Rule };
    Kind kind;
    std::string op;               // builtin tag or rule name
    std::vector<int> parents;     // node ids, aligned with rule slots (-1 = untraced)
    NdArray value;
    double aux = 0.0;             // scale factor for "scale"
    std::vector<SlotValue> slots; // rule inputs, including constants/opaque
  };
};

using LossFn = std::function<Var(Tape&, const std::vector<Var>&)>;

struct GradientResult {
  double value = 0.0;
  std::vector<std::optional<NdArray>> grads;
};

/// One forward trace plus one reverse sweep of `loss` at `at`.
GradientResult gradient(const LossFn& loss, const std::vector<NdArray>& at);

/// Forward evaluation only; bit-identical to the scalar from gradient().
double value(const LossFn& loss, const std::vector<NdArray>& at);

}  // namespace permin::ad
