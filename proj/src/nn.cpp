#include "crowdes/nn.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "crowdes/error.hpp"
#include "crowdes/rng.hpp"

namespace crowdes::nn {

Param& ParamStore::add(const std::string& name, int rows, int cols) {
  if (find(name) != nullptr) throw std::invalid_argument("duplicate parameter name " + name);
  params_.push_back(Param{name, Matrix::Zero(rows, cols), Matrix::Zero(rows, cols)});
  return params_.back();
}

Param* ParamStore::find(const std::string& name) {
  for (Param& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

const Param* ParamStore::find(const std::string& name) const {
  for (const Param& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

void ParamStore::zero_grad() {
  for (Param& p : params_) p.grad.setZero();
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const Param& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

const Matrix& Var::value() const { return tape->value(*this); }

Tape::Tape(const ParamStore* store) : store_(store), store_version_(store ? store->version() : 0) {}

Var Tape::push(Matrix value, std::function<void(std::vector<Node>&, const Node&)> backward) {
  Node n;
  n.value = std::move(value);
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::check_same_tape(Var v) const {
  if (v.tape != this) throw std::invalid_argument("variable belongs to a different tape");
}

namespace {

void accumulate(Matrix& grad, const Matrix& value_shape_ref, const Matrix& delta) {
  if (grad.size() == 0) grad = Matrix::Zero(value_shape_ref.rows(), value_shape_ref.cols());
  grad += delta;
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()));
  }
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

}  // namespace

Var Tape::constant(Matrix value) { return push(std::move(value), nullptr); }

Var Tape::param(Param& p) {
  Var v = push(p.value, nullptr);
  nodes_[v.id].param = &p;
  return v;
}

Var Tape::matmul(Var a, Var b) {
  check_same_tape(a);
  check_same_tape(b);
  const Matrix& av = value(a);
  const Matrix& bv = value(b);
  if (av.cols() != bv.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
  const int ia = a.id, ib = b.id;
  return push(av * bv, [ia, ib](std::vector<Node>& n, const Node& self) {
    accumulate(n[ia].grad, n[ia].value, self.grad * n[ib].value.transpose());
    accumulate(n[ib].grad, n[ib].value, n[ia].value.transpose() * self.grad);
  });
}

Var Tape::add(Var a, Var b) {
  require_same_shape(value(a), value(b), "add");
  const int ia = a.id, ib = b.id;
  return push(value(a) + value(b), [ia, ib](std::vector<Node>& n, const Node& self) {
    accumulate(n[ia].grad, n[ia].value, self.grad);
    accumulate(n[ib].grad, n[ib].value, self.grad);
  });
}

Var Tape::sub(Var a, Var b) {
  require_same_shape(value(a), value(b), "sub");
  const int ia = a.id, ib = b.id;
  return push(value(a) - value(b), [ia, ib](std::vector<Node>& n, const Node& self) {
    accumulate(n[ia].grad, n[ia].value, self.grad);
    accumulate(n[ib].grad, n[ib].value, -self.grad);
  });
}

Var Tape::mul(Var a, Var b) {
  require_same_shape(value(a), value(b), "mul");
  const int ia = a.id, ib = b.id;
  return push(value(a).cwiseProduct(value(b)), [ia, ib](std::vector<Node>& n, const Node& self) {
    accumulate(n[ia].grad, n[ia].value, self.grad.cwiseProduct(n[ib].value));
    accumulate(n[ib].grad, n[ib].value, self.grad.cwiseProduct(n[ia].value));
  });
}

Var Tape::add_row(Var a, Var row) {
  const Matrix& av = value(a);
  const Matrix& rv = value(row);
  if (rv.rows() != 1 || rv.cols() != av.cols()) throw std::invalid_argument("add_row: bad row shape");
  const int ia = a.id, ir = row.id;
  Matrix out = av.rowwise() + rv.row(0);
  return push(std::move(out), [ia, ir](std::vector<Node>& n, const Node& self) {
    accumulate(n[ia].grad, n[ia].value, self.grad);
    accumulate(n[ir].grad, n[ir].value, self.grad.colwise().sum());
  });
}

Var Tape::scale(Var a, double s) {
  const int ia = a.id;
  return push(value(a) * s, [ia, s](std::vector<Node>& n, const Node& self) {
    accumulate(n[ia].grad, n[ia].value, self.grad * s);
  });
}

Var Tape::relu(Var a) {
  const int ia = a.id;
  return push(value(a).cwiseMax(0.0), [ia](std::vector<Node>& n, const Node& self) {
    const Matrix mask = (n[ia].value.array() > 0.0).cast<double>().matrix();
    accumulate(n[ia].grad, n[ia].value, self.grad.cwiseProduct(mask));
  });
}

Var Tape::gelu(Var a) {
  const int ia = a.id;
  const Matrix& x = value(a);
  Matrix out = x.unaryExpr([](double v) {
    return 0.5 * v * (1.0 + std::tanh(kGeluC * (v + 0.044715 * v * v * v)));
  });
  return push(std::move(out), [ia](std::vector<Node>& n, const Node& self) {
    const Matrix d = n[ia].value.unaryExpr([](double v) {
      const double u = kGeluC * (v + 0.044715 * v * v * v);
      const double t = std::tanh(u);
      const double du = kGeluC * (1.0 + 3.0 * 0.044715 * v * v);
      return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
    });
    accumulate(n[ia].grad, n[ia].value, self.grad.cwiseProduct(d));
  });
}

Var Tape::softmax_rows(Var a) {
  const int ia = a.id;
  const Matrix& x = value(a);
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - m).exp().matrix();
    y.row(r) /= y.row(r).sum();
  }
  return push(std::move(y), [ia](std::vector<Node>& n, const Node& self) {
    const Matrix& yv = self.value;
    const Eigen::VectorXd inner = self.grad.cwiseProduct(yv).rowwise().sum();
    Matrix d = self.grad;
    d.colwise() -= inner;
    accumulate(n[ia].grad, n[ia].value, yv.cwiseProduct(d));
  });
}

Var Tape::transpose(Var a) {
  const int ia = a.id;
  return push(value(a).transpose(), [ia](std::vector<Node>& n, const Node& self) {
    accumulate(n[ia].grad, n[ia].value, self.grad.transpose());
  });
}

Var Tape::concat_cols(Var a, Var b) {
  const Matrix& av = value(a);
  const Matrix& bv = value(b);
  if (av.rows() != bv.rows()) throw std::invalid_argument("concat_cols: row counts differ");
  Matrix out(av.rows(), av.cols() + bv.cols());
  out << av, bv;
  const int ia = a.id, ib = b.id;
  const Eigen::Index ca = av.cols(), cb = bv.cols();
  return push(std::move(out), [ia, ib, ca, cb](std::vector<Node>& n, const Node& self) {
    accumulate(n[ia].grad, n[ia].value, self.grad.leftCols(ca));
    accumulate(n[ib].grad, n[ib].value, self.grad.rightCols(cb));
  });
}

Var Tape::sum(Var a) {
  const int ia = a.id;
  Matrix out(1, 1);
  out(0, 0) = value(a).sum();
  return push(std::move(out), [ia](std::vector<Node>& n, const Node& self) {
    accumulate(n[ia].grad, n[ia].value,
               Matrix::Constant(n[ia].value.rows(), n[ia].value.cols(), self.grad(0, 0)));
  });
}

Var Tape::mse(Var pred, const Matrix& target) {
  require_same_shape(value(pred), target, "mse");
  const int ip = pred.id;
  const double count = static_cast<double>(target.size());
  Matrix out(1, 1);
  out(0, 0) = (value(pred) - target).squaredNorm() / count;
  return push(std::move(out), [ip, target, count](std::vector<Node>& n, const Node& self) {
    accumulate(n[ip].grad, n[ip].value, (n[ip].value - target) * (2.0 * self.grad(0, 0) / count));
  });
}

Var Tape::mae(Var pred, const Matrix& target) {
  require_same_shape(value(pred), target, "mae");
  const int ip = pred.id;
  const double count = static_cast<double>(target.size());
  Matrix out(1, 1);
  out(0, 0) = (value(pred) - target).cwiseAbs().sum() / count;
  return push(std::move(out), [ip, target, count](std::vector<Node>& n, const Node& self) {
    const Matrix sign = (n[ip].value - target).unaryExpr([](double d) {
      return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
    });
    accumulate(n[ip].grad, n[ip].value, sign * (self.grad(0, 0) / count));
  });
}

Var Tape::cross_entropy(Var logits, const std::vector<int>& labels) {
  const Matrix& x = value(logits);
  if (static_cast<Eigen::Index>(labels.size()) != x.rows()) {
    throw std::invalid_argument("cross_entropy: one label per row required");
  }
  Matrix probs(x.rows(), x.cols());
  double loss = 0.0;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    if (labels[r] < 0 || labels[r] >= x.cols()) throw std::invalid_argument("cross_entropy: label out of range");
    const double m = x.row(r).maxCoeff();
    const Eigen::RowVectorXd e = (x.row(r).array() - m).exp().matrix();
    const double z = e.sum();
    probs.row(r) = e / z;
    loss += (m + std::log(z)) - x(r, labels[r]);
  }
  const double rows = static_cast<double>(x.rows());
  Matrix out(1, 1);
  out(0, 0) = loss / rows;
  const int il = logits.id;
  return push(std::move(out), [il, probs, labels, rows](std::vector<Node>& n, const Node& self) {
    Matrix d = probs;
    for (Eigen::Index r = 0; r < d.rows(); ++r) d(r, labels[r]) -= 1.0;
    accumulate(n[il].grad, n[il].value, d * (self.grad(0, 0) / rows));
  });
}

void Tape::backward(Var output) {
  check_same_tape(output);
  const Matrix& v = value(output);
  backward(output, Matrix::Ones(v.rows(), v.cols()));
}

void Tape::backward(Var output, const Matrix& output_grad) {
  check_same_tape(output);
  if (consumed_) throw StaleTapeError("tape has already been run backward");
  if (store_ != nullptr && store_->version() != store_version_) {
    throw StaleTapeError("parameters changed since the forward pass");
  }
  require_same_shape(value(output), output_grad, "backward seed");
  consumed_ = true;
  for (Node& n : nodes_) n.grad.resize(0, 0);
  nodes_[output.id].grad = output_grad;
  for (int i = output.id; i >= 0; --i) {
    Node& node = nodes_[i];
    if (node.grad.size() == 0) continue;
    if (node.param != nullptr) node.param->grad += node.grad;
    if (node.backward) node.backward(nodes_, node);
  }
}

Var activate(Tape& tape, Var x, Activation act) {
  return act == Activation::kRelu ? tape.relu(x) : tape.gelu(x);
}

Linear::Linear(ParamStore& store, const std::string& name, int in, int out, Init init,
               std::uint64_t seed)
    : in_(in), out_(out) {
  if (in <= 0 || out <= 0) throw std::invalid_argument("linear layer widths must be positive");
  w_ = &store.add(name + ".w", in, out);
  b_ = &store.add(name + ".b", 1, out);
  switch (init) {
    case Init::kZero:
      break;
    case Init::kIdentity:
      for (int i = 0; i < std::min(in, out); ++i) w_->value(i, i) = 1.0;
      break;
    case Init::kRandom: {
      Rng rng = named_stream(seed, name);
      const double stddev = 1.0 / std::sqrt(static_cast<double>(in));
      for (Eigen::Index i = 0; i < w_->value.size(); ++i) w_->value.data()[i] = stddev * standard_normal(rng);
      break;
    }
  }
}

Var Linear::forward(Tape& tape, Var x) const {
  if (x.value().cols() != in_) {
    throw std::invalid_argument("linear layer expects width " + std::to_string(in_) + ", got " +
                                std::to_string(x.value().cols()));
  }
  return tape.add_row(tape.matmul(x, tape.param(*w_)), tape.param(*b_));
}

void NetSpec::validate() const {
  if (widths.size() < 2) throw std::invalid_argument("net spec needs at least input and output widths");
  for (int w : widths) {
    if (w <= 0) throw std::invalid_argument("net widths must be positive");
  }
  if (heads <= 0) throw std::invalid_argument("attention head count must be positive");
}

Mlp::Mlp(ParamStore& store, const std::string& name, const NetSpec& spec) : spec_(spec) {
  spec_.validate();
  for (std::size_t i = 0; i + 1 < spec.widths.size(); ++i) {
    layers_.emplace_back(store, name + "." + std::to_string(i), spec.widths[i], spec.widths[i + 1],
                         spec.init, spec.seed);
  }
}

Var Mlp::forward(Tape& tape, Var x) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i].forward(tape, x);
    if (i + 1 < layers_.size()) x = activate(tape, x, spec_.activation);
  }
  return x;
}

SetAttentionBlock::SetAttentionBlock(ParamStore& store, const std::string& name, int model_dim,
                                     int context_dim, int heads, int ffn_width, Activation act,
                                     std::uint64_t seed, Init init)
    : act_(act), dim_(model_dim) {
  if (heads <= 0 || model_dim % heads != 0) {
    throw std::invalid_argument("model width must be divisible by the head count");
  }
  head_dim_ = model_dim / heads;
  for (int h = 0; h < heads; ++h) {
    const std::string s = name + ".self" + std::to_string(h);
    self_heads_.push_back({Linear(store, s + ".q", model_dim, head_dim_, init, seed),
                           Linear(store, s + ".k", model_dim, head_dim_, init, seed),
                           Linear(store, s + ".v", model_dim, head_dim_, init, seed),
                           Linear(store, s + ".o", head_dim_, model_dim, init, seed)});
    if (context_dim > 0) {
      const std::string c = name + ".cross" + std::to_string(h);
      cross_heads_.push_back({Linear(store, c + ".q", model_dim, head_dim_, init, seed),
                              Linear(store, c + ".k", context_dim, head_dim_, init, seed),
                              Linear(store, c + ".v", context_dim, head_dim_, init, seed),
                              Linear(store, c + ".o", head_dim_, model_dim, init, seed)});
    }
  }
  ffn_in_ = Linear(store, name + ".ffn_in", model_dim, ffn_width, init, seed);
  ffn_out_ = Linear(store, name + ".ffn_out", ffn_width, model_dim, init, seed);
}

Var SetAttentionBlock::attend(Tape& tape, const std::vector<Head>& heads, Var queries, Var keys) const {
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim_));
  Var total;
  for (const Head& h : heads) {
    const Var q = h.q.forward(tape, queries);
    const Var k = h.k.forward(tape, keys);
    const Var v = h.v.forward(tape, keys);
    const Var weights = tape.softmax_rows(tape.scale(tape.matmul(q, tape.transpose(k)), inv_sqrt));
    const Var out = h.o.forward(tape, tape.matmul(weights, v));
    total = total.valid() ? tape.add(total, out) : out;
  }
  return total;
}

Var SetAttentionBlock::forward(Tape& tape, Var tokens, Var context) const {
  if (tokens.value().rows() == 0) throw std::invalid_argument("set attention needs at least one token");
  if (tokens.value().cols() != dim_) throw std::invalid_argument("set attention: token width mismatch");
  Var h = tape.add(tokens, attend(tape, self_heads_, tokens, tokens));
  if (context.valid() && context.value().rows() > 0 && !cross_heads_.empty()) {
    h = tape.add(h, attend(tape, cross_heads_, h, context));
  }
  const Var ff = ffn_out_.forward(tape, activate(tape, ffn_in_.forward(tape, h), act_));
  return tape.add(h, ff);
}

StepReport adam_step(ParamStore& store, AdamState& state, const AdamOptions& options) {
  auto& params = store.params();
  for (const Param& p : params) {
    if (!p.grad.allFinite()) return {false, "non-finite gradient in " + p.name + "; step rejected"};
  }
  if (state.m.size() != params.size()) {
    state.m.clear();
    state.v.clear();
    for (const Param& p : params) {
      state.m.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
      state.v.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(options.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(options.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = params[i];
    state.m[i] = options.beta1 * state.m[i] + (1.0 - options.beta1) * p.grad;
    state.v[i] = options.beta2 * state.v[i] + (1.0 - options.beta2) * p.grad.cwiseProduct(p.grad);
    p.value *= (1.0 - options.lr * options.weight_decay);
    const Matrix m_hat = state.m[i] / bc1;
    const Matrix v_hat = state.v[i] / bc2;
    p.value -= options.lr * (m_hat.array() / (v_hat.array().sqrt() + options.eps)).matrix();
  }
  store.bump_version();
  return {true, {}};
}

void write_params(std::ostream& out, const ParamStore& store) {
  char buf[32];
  for (const Param& p : store.params()) {
    out << "param " << p.name << ' ' << p.value.rows() << ' ' << p.value.cols() << '\n';
    for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.value.cols(); ++c) {
        std::snprintf(buf, sizeof buf, "%s%.17g", c ? " " : "", p.value(r, c));
        out << buf;
      }
      out << '\n';
    }
  }
}

void read_params(std::istream& in, ParamStore& store, const std::string& source) {
  std::size_t loaded = 0;
  std::string tag;
  while (in >> tag) {
    if (tag != "param") throw InputError(source + ": expected 'param', got '" + tag + "'");
    std::string name;
    Eigen::Index rows = 0, cols = 0;
    if (!(in >> name >> rows >> cols)) throw InputError(source + ": malformed param header");
    Param* p = store.find(name);
    if (p == nullptr) throw InputError(source + ": unexpected parameter " + name);
    if (p->value.rows() != rows || p->value.cols() != cols) {
      throw InputError(source + ": shape mismatch for " + name);
    }
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        if (!(in >> p->value(r, c))) throw InputError(source + ": truncated values for " + name);
      }
    }
    ++loaded;
  }
  if (loaded != store.params().size()) throw InputError(source + ": checkpoint is missing parameters");
  store.bump_version();
}

}  // namespace crowdes::nn
