#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "ibkd/linalg.hpp"
#include "ibkd/objectives.hpp"

namespace ibkd::encoder {

/// Layer widths [d_in, h₁, …, d_out]; tanh on hidden layers, identity output.
struct MLPSpec {
  std::vector<std::size_t> layer_dims;

  void validate() const;
  std::size_t d_in() const { return layer_dims.front(); }
  std::size_t d_out() const { return layer_dims.back(); }
  std::size_t num_layers() const { return layer_dims.size() - 1; }
  bool operator==(const MLPSpec&) const = default;
};

/// Affine layer, out = in·wᵀ + b with w of shape (d_out × d_in).
struct Layer {
  Matrix w;
  Matrix b;  // 1 × d_out
  bool operator==(const Layer&) const = default;
};

struct StudentModel {
  MLPSpec spec;
  std::vector<Layer> layers;
  /// W_proj, d'×d with d' < d. Applied after the network when present.
  std::optional<Matrix> proj;
  /// Distillation-only alignment with the teacher; dropped afterwards.
  std::optional<objectives::AlignmentHead> align;

  /// Glorot-uniform weights, zero biases, seeded.
  static StudentModel init(const MLPSpec& spec, std::uint64_t seed);

  /// Adds an alignment head to a d_t-dimensional teacher, initialized to the
  /// rectangular identity.
  void attach_alignment(std::size_t teacher_dim);
  /// Adds a seeded Glorot-uniform projection to `reduced` dimensions.
  void attach_projection(std::size_t reduced, std::uint64_t seed);

  /// Final embedding width: d' when projecting, else d_out.
  std::size_t embedding_dim() const;

  /// Parameters in checkpoint order: w₀, b₀, w₁, b₁, …, proj, align.
  std::vector<Matrix*> parameters();
  std::vector<const Matrix*> parameters() const;

  /// FNV-1a over every parameter's bytes; equal iff bit-identical state.
  std::uint64_t checksum() const;

  bool operator==(const StudentModel&) const = default;
};

/// Activations retained by forward(): inputs, then each layer's output.
struct ForwardCache {
  std::vector<Matrix> activations;
  std::uint64_t model_checksum = 0;
};

struct ForwardResult {
  Matrix output;
  ForwardCache cache;
};

ForwardResult forward(const StudentModel& model, const Matrix& inputs);

/// Network output followed by the projection when one is attached.
Matrix embed(const StudentModel& model, const Matrix& inputs);

struct Gradients {
  std::vector<Matrix> w;
  std::vector<Matrix> b;
  Matrix grad_in;
};

/// Reverse-mode gradients for one forward pass. Throws a state error when the
/// cache does not belong to `model` in its current state.
Gradients backward(const StudentModel& model, const ForwardCache& cache, const Matrix& grad_out);

/// s·projᵀ.
Matrix project(const Matrix& proj, const Matrix& s);

/// Frozen id → embedding table.
struct LookupTable {
  std::vector<std::string> ids;
  Matrix table;
  std::unordered_map<std::string, std::size_t> index;

  LookupTable() = default;
  LookupTable(std::vector<std::string> ids, Matrix table);
  std::span<const double> at(const std::string& id) const;
};

/// The frozen teacher: a network or a lookup table. Accessors are const only.
class TeacherModel {
 public:
  explicit TeacherModel(StudentModel network);
  explicit TeacherModel(LookupTable table);

  std::size_t dim() const;
  /// Embeddings for a batch. Networks read `inputs`; lookup tables read `ids`.
  Matrix embed(std::span<const std::string> ids, const Matrix& inputs) const;
  std::uint64_t checksum() const;
  const std::variant<StudentModel, LookupTable>& impl() const { return impl_; }

 private:
  std::variant<StudentModel, LookupTable> impl_;
};

std::vector<unsigned char> serialize_checkpoint(const StudentModel& model);
StudentModel deserialize_checkpoint(const std::vector<unsigned char>& bytes);
void save_checkpoint(const std::string& path, const StudentModel& model);
StudentModel load_checkpoint(const std::string& path);

}  // namespace ibkd::encoder
