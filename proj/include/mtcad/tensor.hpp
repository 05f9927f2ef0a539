#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace mtcad {

// Dense 64-bit float tensor of rank 1..3, row-major. Values are written
// once by the op that produces them; gradients are allocated lazily by
// Tape::backward.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor from_data(std::vector<int> shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double v);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const;
  int rank() const { return static_cast<int>(shape().size()); }
  int64_t size() const;

  std::vector<double>& data();
  const std::vector<double>& data() const;
  // gradient slot; empty until backward touches this tensor
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  bool requires_grad() const;

  double item() const;  // scalar tensors only

 private:
  struct Node;
  std::shared_ptr<Node> node_;
  friend class Tape;
};

enum class ElemKind { Relu, Tanh, Sigmoid, Add, Mul, Sub };

enum class BnMode {
  Train,          // batch statistics, running averages updated
  TrainNoUpdate,  // batch statistics, running averages untouched
  Inference,      // frozen running statistics
};

// Per-feature running statistics of one batch-norm instance.
struct BnStats {
  std::vector<double> mean, var;
  explicit BnStats(int dim = 0) : mean(dim, 0.0), var(dim, 1.0) {}
};

// Records forward ops and replays their backward rules in reverse order.
// Replaying is deterministic: accumulation order is fixed by the tape.
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }
  void set_recording(bool r) { recording_ = r; }
  size_t num_records() const { return records_.size(); }

  // a[m,k] * b[k,n]
  Tensor matmul(const Tensor& a, const Tensor& b);
  // y = x * w^T over the last dim; x rank 2 or 3, w[out,in]
  Tensor linear(const Tensor& x, const Tensor& w);
  // adds vector b[d] to every row of x[...,d]
  Tensor add_bias(const Tensor& x, const Tensor& b);
  // batch matmul, a[B,m,k] * b[B,k,n]; transpose_b reads b as [B,n,k]
  Tensor bmm(const Tensor& a, const Tensor& b, bool transpose_b = false);
  // concatenate rank-3 tensors along dim 1
  Tensor concat_mid(const Tensor& a, const Tensor& b);

  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor relu(const Tensor& x);
  Tensor tanh(const Tensor& x);
  Tensor sigmoid(const Tensor& x);
  // ln(max(x, 1e-12)); the floor keeps cross-entropy finite at clamped inputs
  Tensor log_floored(const Tensor& x);
  Tensor scale(const Tensor& x, double c);
  Tensor elementwise(ElemKind kind, const Tensor& a);
  Tensor elementwise(ElemKind kind, const Tensor& a, const Tensor& b);

  // softmax over the last dimension, stabilized by per-row max subtraction
  Tensor softmax_rows(const Tensor& x);
  // writes -1e30 at column (row_index + col_offset) of every attention row
  Tensor mask_self(const Tensor& scores, int col_offset);
  Tensor sum_all(const Tensor& x);
  Tensor reshape(const Tensor& x, std::vector<int> shape);

  // Normalizes over all leading dims, per feature of the last dim.
  // Train modes use batch statistics; inference uses `stats`.
  Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                    BnStats& stats, BnMode mode, double momentum = 0.1,
                    double eps = 1e-5);

  // Populates gradients of every tensor reachable from `loss` on this tape.
  void backward(const Tensor& loss);

 private:
  struct Record {
    std::function<void()> backward;
  };

  Tensor make(std::vector<int> shape);
  void note(const Tensor& t);
  void record(std::function<void()> fn);

  std::vector<Record> records_;
  std::vector<Tensor> touched_;
  bool recording_ = true;
};

std::string shape_str(const std::vector<int>& s);

}  // namespace mtcad
