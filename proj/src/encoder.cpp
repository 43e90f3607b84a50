#include "ibkd/encoder.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <random>

#include "binary_io.hpp"
#include "ibkd/error.hpp"

namespace ibkd::encoder {

namespace {

constexpr char kMagic[4] = {'I', 'B', 'K', 'D'};
constexpr std::uint32_t kVersion = 1;

Matrix glorot(std::size_t fan_out, std::size_t fan_in, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix w(fan_out, fan_in);
  for (double& v : w.data()) v = dist(rng);
  return w;
}

std::uint64_t fnv1a(std::uint64_t h, const Matrix& m) {
  for (double v : m.data()) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xFF;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace

void MLPSpec::validate() const {
  if (layer_dims.size() < 2) fail(ErrorKind::Config, "MLP needs at least an input and an output width");
  for (std::size_t d : layer_dims)
    if (d < 1) fail(ErrorKind::Config, "MLP layer widths must be at least 1");
}

StudentModel StudentModel::init(const MLPSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  StudentModel m;
  m.spec = spec;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const std::size_t in = spec.layer_dims[l], out = spec.layer_dims[l + 1];
    m.layers.push_back({glorot(out, in, rng), Matrix(1, out)});
  }
  return m;
}

void StudentModel::attach_alignment(std::size_t teacher_dim) {
  Matrix w(spec.d_out(), teacher_dim);
  for (std::size_t i = 0; i < std::min(w.rows(), w.cols()); ++i) w(i, i) = 1.0;
  align = objectives::AlignmentHead{std::move(w)};
}

void StudentModel::attach_projection(std::size_t reduced, std::uint64_t seed) {
  if (reduced < 1 || reduced >= spec.d_out()) {
    fail(ErrorKind::Config, "projection must reduce: requested " + std::to_string(reduced) + " from " +
                                std::to_string(spec.d_out()));
  }
  std::mt19937_64 rng(seed);
  proj = glorot(reduced, spec.d_out(), rng);
}

std::size_t StudentModel::embedding_dim() const { return proj ? proj->rows() : spec.d_out(); }

std::vector<Matrix*> StudentModel::parameters() {
  std::vector<Matrix*> out;
  for (auto& l : layers) {
    out.push_back(&l.w);
    out.push_back(&l.b);
  }
  if (proj) out.push_back(&*proj);
  if (align) out.push_back(&align->w);
  return out;
}

std::vector<const Matrix*> StudentModel::parameters() const {
  std::vector<const Matrix*> out;
  for (const auto& l : layers) {
    out.push_back(&l.w);
    out.push_back(&l.b);
  }
  if (proj) out.push_back(&*proj);
  if (align) out.push_back(&align->w);
  return out;
}

std::uint64_t StudentModel::checksum() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const Matrix* p : parameters()) h = fnv1a(h, *p);
  return h;
}

ForwardResult forward(const StudentModel& model, const Matrix& inputs) {
  if (inputs.cols() != model.spec.d_in()) {
    fail(ErrorKind::Shape, "forward: input has " + std::to_string(inputs.cols()) + " columns, model expects " +
                               std::to_string(model.spec.d_in()));
  }
  ForwardResult r;
  r.cache.model_checksum = model.checksum();
  r.cache.activations.reserve(model.layers.size() + 1);
  r.cache.activations.push_back(inputs);
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const Layer& layer = model.layers[l];
    Matrix z = linalg::matmul_nt(r.cache.activations.back(), layer.w);
    const bool hidden = l + 1 < model.layers.size();
    for (std::size_t i = 0; i < z.rows(); ++i) {
      auto row = z.row(i);
      for (std::size_t j = 0; j < row.size(); ++j) {
        row[j] += layer.b(0, j);
        if (hidden) row[j] = std::tanh(row[j]);
      }
    }
    r.cache.activations.push_back(std::move(z));
  }
  r.output = r.cache.activations.back();
  return r;
}

Matrix embed(const StudentModel& model, const Matrix& inputs) {
  Matrix out = forward(model, inputs).output;
  if (model.proj) out = project(*model.proj, out);
  return out;
}

Gradients backward(const StudentModel& model, const ForwardCache& cache, const Matrix& grad_out) {
  const std::size_t L = model.layers.size();
  if (cache.activations.size() != L + 1) fail(ErrorKind::State, "backward: cache does not match model depth");
  if (cache.model_checksum != model.checksum()) {
    fail(ErrorKind::State, "backward: stale cache, model parameters changed since forward");
  }
  const Matrix& out = cache.activations.back();
  if (grad_out.rows() != out.rows() || grad_out.cols() != out.cols()) {
    fail(ErrorKind::State, "backward: grad_out " + grad_out.shape_str() + " does not match output " + out.shape_str());
  }
  Gradients g;
  g.w.resize(L);
  g.b.resize(L);
  Matrix delta = grad_out;
  for (std::size_t l = L; l-- > 0;) {
    if (l + 1 < L) {
      // tanh'(z) = 1 − tanh(z)²
      const Matrix& act = cache.activations[l + 1];
      for (std::size_t i = 0; i < delta.size(); ++i) delta.data()[i] *= 1.0 - act.data()[i] * act.data()[i];
    }
    g.w[l] = linalg::matmul_tn(delta, cache.activations[l]);
    g.b[l] = Matrix(1, delta.cols());
    for (std::size_t i = 0; i < delta.rows(); ++i)
      for (std::size_t j = 0; j < delta.cols(); ++j) g.b[l](0, j) += delta(i, j);
    delta = linalg::matmul(delta, model.layers[l].w);
  }
  g.grad_in = std::move(delta);
  return g;
}

Matrix project(const Matrix& proj, const Matrix& s) {
  if (proj.cols() != s.cols()) {
    fail(ErrorKind::Shape, "project: projection " + proj.shape_str() + " cannot map embeddings " + s.shape_str());
  }
  return linalg::matmul_nt(s, proj);
}

LookupTable::LookupTable(std::vector<std::string> ids_in, Matrix table_in)
    : ids(std::move(ids_in)), table(std::move(table_in)) {
  if (ids.size() != table.rows()) fail(ErrorKind::Shape, "lookup table: id count does not match row count");
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!index.emplace(ids[i], i).second) fail(ErrorKind::Data, "lookup table: duplicate id '" + ids[i] + "'");
  }
}

std::span<const double> LookupTable::at(const std::string& id) const {
  auto it = index.find(id);
  if (it == index.end()) fail(ErrorKind::Data, "teacher has no embedding for id '" + id + "'");
  return table.row(it->second);
}

TeacherModel::TeacherModel(StudentModel network) : impl_(std::move(network)) {}
TeacherModel::TeacherModel(LookupTable table) : impl_(std::move(table)) {}

std::size_t TeacherModel::dim() const {
  if (const auto* net = std::get_if<StudentModel>(&impl_)) return net->embedding_dim();
  return std::get<LookupTable>(impl_).table.cols();
}

Matrix TeacherModel::embed(std::span<const std::string> ids, const Matrix& inputs) const {
  if (const auto* net = std::get_if<StudentModel>(&impl_)) return encoder::embed(*net, inputs);
  const auto& lut = std::get<LookupTable>(impl_);
  Matrix out(ids.size(), lut.table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto src = lut.at(ids[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

std::uint64_t TeacherModel::checksum() const {
  if (const auto* net = std::get_if<StudentModel>(&impl_)) return net->checksum();
  return fnv1a(1469598103934665603ULL, std::get<LookupTable>(impl_).table);
}

std::vector<unsigned char> serialize_checkpoint(const StudentModel& model) {
  detail::ByteWriter w;
  w.raw(kMagic, 4);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(model.spec.layer_dims.size()));
  for (std::size_t d : model.spec.layer_dims) w.u32(static_cast<std::uint32_t>(d));
  w.u8(model.proj ? 1 : 0);
  if (model.proj) {
    w.u32(static_cast<std::uint32_t>(model.proj->rows()));
    w.u32(static_cast<std::uint32_t>(model.proj->cols()));
  }
  w.u8(model.align ? 1 : 0);
  if (model.align) {
    w.u32(static_cast<std::uint32_t>(model.align->w.rows()));
    w.u32(static_cast<std::uint32_t>(model.align->w.cols()));
  }
  for (const Matrix* p : model.parameters())
    for (double v : p->data()) w.f64(v);
  return w.take();
}

StudentModel deserialize_checkpoint(const std::vector<unsigned char>& bytes) {
  detail::ByteReader r(bytes, "checkpoint");
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) fail(ErrorKind::Format, "checkpoint: bad magic at byte offset 0");
  if (const auto v = r.u32(); v != kVersion) r.error("unsupported format version " + std::to_string(v));
  const std::uint32_t ndims = r.u32();
  if (ndims < 2 || ndims > 64) r.error("implausible layer count " + std::to_string(ndims));
  MLPSpec spec;
  for (std::uint32_t i = 0; i < ndims; ++i) spec.layer_dims.push_back(r.u32());
  try {
    spec.validate();
  } catch (const Error& e) {
    r.error(e.what());
  }
  StudentModel m;
  m.spec = spec;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    m.layers.push_back({Matrix(spec.layer_dims[l + 1], spec.layer_dims[l]), Matrix(1, spec.layer_dims[l + 1])});
  }
  if (r.u8()) {
    const std::uint32_t rows = r.u32(), cols = r.u32();
    if (cols != spec.d_out() || rows >= cols || rows == 0) r.error("projection shape inconsistent with network");
    m.proj = Matrix(rows, cols);
  }
  if (r.u8()) {
    const std::uint32_t rows = r.u32(), cols = r.u32();
    if (rows != spec.d_out() || cols == 0) r.error("alignment shape inconsistent with network");
    m.align = objectives::AlignmentHead{Matrix(rows, cols)};
  }
  for (Matrix* p : m.parameters())
    for (double& v : p->data()) v = r.f64();
  if (!r.at_end()) r.error("trailing bytes after parameters");
  for (const Matrix* p : m.parameters())
    if (!linalg::all_finite(*p)) fail(ErrorKind::Format, "checkpoint: non-finite parameter value");
  return m;
}

void save_checkpoint(const std::string& path, const StudentModel& model) {
  detail::write_file_bytes(path, serialize_checkpoint(model));
}

StudentModel load_checkpoint(const std::string& path) { return deserialize_checkpoint(detail::read_file_bytes(path)); }

}  // namespace ibkd::encoder
