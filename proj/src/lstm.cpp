#include "qasched/lstm.hpp"

#include "qasched/errors.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <exception>
#include <fstream>
#include <random>
#include <string>

namespace qasched {

namespace {

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z) {
  return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

Eigen::MatrixXd tanh_of(const Eigen::MatrixXd& z) {
  return z.array().tanh().matrix();
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double unit_uniform(std::mt19937_64& engine) {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

/// Inverted-dropout masks [layer][t], H_l x B.
std::vector<std::vector<Eigen::MatrixXd>> draw_masks(const LstmModel& model,
                                                     int steps, int batch,
                                                     std::uint64_t seed,
                                                     std::uint64_t first_sample) {
  const double keep = 1.0 - model.dropout_rate;
  std::vector<std::vector<Eigen::MatrixXd>> masks(model.layers.size());
  for (std::size_t l = 0; l < model.layers.size(); ++l)
    masks[l].assign(steps, Eigen::MatrixXd(model.widths[l], batch));
  for (int b = 0; b < batch; ++b) {
    std::mt19937_64 engine(splitmix64(seed ^ splitmix64(first_sample + b)));
    for (std::size_t l = 0; l < model.layers.size(); ++l)
      for (int t = 0; t < steps; ++t)
        for (int u = 0; u < model.widths[l]; ++u)
          masks[l][t](u, b) = unit_uniform(engine) < keep ? 1.0 / keep : 0.0;
  }
  return masks;
}

void glorot_uniform(Eigen::MatrixXd& m, std::mt19937_64& engine) {
  const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (Eigen::Index k = 0; k < m.size(); ++k)
    m.data()[k] = (2.0 * unit_uniform(engine) - 1.0) * limit;
}

/// Matrix with orthonormal columns from the QR factorisation of a Gaussian.
Eigen::MatrixXd orthogonal(Eigen::Index rows, Eigen::Index cols,
                           std::mt19937_64& engine) {
  Eigen::MatrixXd gaussian(rows, cols);
  for (Eigen::Index k = 0; k < gaussian.size(); ++k) {
    // Box-Muller keeps the draw independent of the library's normal_distribution.
    const double u1 = 1.0 - unit_uniform(engine);
    const double u2 = unit_uniform(engine);
    gaussian.data()[k] = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
  // Sign fix makes the factor unique.
  const Eigen::MatrixXd r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  for (Eigen::Index c = 0; c < cols; ++c)
    if (r(c, c) < 0) q.col(c) *= -1.0;
  return q;
}

std::uint64_t fnv1a(const unsigned char* data, std::size_t size) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (std::size_t k = 0; k < size; ++k) {
    hash ^= data[k];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

class Writer {
 public:
  template <class T>
  void put(const T& value) {
    const auto* p = reinterpret_cast<const unsigned char*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  std::vector<unsigned char>& bytes() { return bytes_; }

 private:
  std::vector<unsigned char> bytes_;
};

class Reader {
 public:
  Reader(const unsigned char* data, std::size_t size) : data_(data), size_(size) {}
  template <class T>
  T get() {
    if (offset_ + sizeof(T) > size_) throw FormatError("checkpoint is truncated");
    T value;
    std::memcpy(&value, data_ + offset_, sizeof(T));
    offset_ += sizeof(T);
    return value;
  }
  std::size_t offset() const { return offset_; }

 private:
  const unsigned char* data_;
  std::size_t size_;
  std::size_t offset_ = 0;
};

constexpr char kMagic[8] = {'Q', 'A', 'S', 'L', 'S', 'T', 'M', '\0'};

LstmModel allocate(const std::vector<int>& widths, int input_size,
                   int output_size, double dropout_rate) {
  if (widths.empty()) throw UsageError("model needs at least one LSTM layer");
  for (int w : widths)
    if (w < 1) throw UsageError("layer widths must be positive");
  if (output_size < 1 || input_size < 1) throw UsageError("bad model io size");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw UsageError("dropout rate must be in [0, 1)");
  LstmModel model;
  model.widths = widths;
  model.input_size = input_size;
  model.output_size = output_size;
  model.dropout_rate = dropout_rate;
  int in = input_size;
  for (int w : widths) {
    LstmLayer layer;
    layer.input_weights = Eigen::MatrixXd::Zero(4 * w, in);
    layer.recurrent_weights = Eigen::MatrixXd::Zero(4 * w, w);
    layer.bias = Eigen::VectorXd::Zero(4 * w);
    model.layers.push_back(std::move(layer));
    in = w;
  }
  model.head_weights = Eigen::MatrixXd::Zero(output_size, widths.back());
  model.head_bias = Eigen::VectorXd::Zero(output_size);
  return model;
}

}  // namespace

void LstmModel::validate() const {
  if (widths.size() != layers.size() || widths.empty())
    throw UsageError("layer count does not match the architecture");
  int in = input_size;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const int w = widths[l];
    const auto& layer = layers[l];
    if (layer.input_weights.rows() != 4 * w || layer.input_weights.cols() != in ||
        layer.recurrent_weights.rows() != 4 * w || layer.recurrent_weights.cols() != w ||
        layer.bias.size() != 4 * w)
      throw UsageError("layer " + std::to_string(l) + " tensor shapes are inconsistent");
    in = w;
  }
  if (head_weights.rows() != output_size || head_weights.cols() != widths.back() ||
      head_bias.size() != output_size)
    throw UsageError("head tensor shapes are inconsistent");
  for (auto span : parameter_spans(*this))
    for (double v : span)
      if (!std::isfinite(v)) throw UsageError("model contains non-finite weights");
}

std::size_t LstmModel::parameter_count() const {
  std::size_t count = 0;
  for (auto span : parameter_spans(*this)) count += span.size();
  return count;
}

LstmModel init_model(const std::vector<int>& widths, int output_size,
                     double dropout_rate, std::uint64_t seed) {
  LstmModel model = allocate(widths, 1, output_size, dropout_rate);
  std::mt19937_64 engine(seed);
  for (auto& layer : model.layers) {
    const int w = layer.width();
    glorot_uniform(layer.input_weights, engine);
    layer.recurrent_weights = orthogonal(4 * w, w, engine);
    layer.bias.segment(w, w).setOnes();
  }
  glorot_uniform(model.head_weights, engine);
  return model;
}

LstmModel zeros_like(const LstmModel& model) {
  LstmModel zero = allocate(model.widths, model.input_size, model.output_size,
                            model.dropout_rate);
  zero.layout = model.layout;
  return zero;
}

std::vector<std::span<double>> parameter_spans(LstmModel& model) {
  std::vector<std::span<double>> spans;
  auto add = [&spans](auto& m) { spans.emplace_back(m.data(), static_cast<std::size_t>(m.size())); };
  for (auto& layer : model.layers) {
    add(layer.input_weights);
    add(layer.recurrent_weights);
    add(layer.bias);
  }
  add(model.head_weights);
  add(model.head_bias);
  return spans;
}

std::vector<std::span<const double>> parameter_spans(const LstmModel& model) {
  std::vector<std::span<const double>> spans;
  for (auto span : parameter_spans(const_cast<LstmModel&>(model)))
    spans.emplace_back(span.data(), span.size());
  return spans;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> lstm_cell_step(
    const Eigen::VectorXd& x, const Eigen::VectorXd& h_prev,
    const Eigen::VectorXd& c_prev, const LstmLayer& layer) {
  const int w = layer.width();
  if (x.size() != layer.input_weights.cols() || h_prev.size() != w || c_prev.size() != w)
    throw UsageError("lstm_cell_step: inconsistent shapes");
  const Eigen::VectorXd z =
      layer.input_weights * x + layer.recurrent_weights * h_prev + layer.bias;
  const Eigen::VectorXd i = sigmoid(z.segment(0, w));
  const Eigen::VectorXd f = sigmoid(z.segment(w, w));
  const Eigen::VectorXd g = tanh_of(z.segment(2 * w, w));
  const Eigen::VectorXd o = sigmoid(z.segment(3 * w, w));
  Eigen::VectorXd c = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
  Eigen::VectorXd h = o.cwiseProduct(tanh_of(c));
  return {std::move(h), std::move(c)};
}

Eigen::MatrixXd forward_batch(const LstmModel& model,
                              const Eigen::MatrixXd& features,
                              bool training_mode, std::uint64_t dropout_seed,
                              std::uint64_t first_sample, ForwardCache* cache) {
  const int steps = static_cast<int>(features.rows());
  const int batch = static_cast<int>(features.cols());
  if (steps < 1) throw UsageError("forward needs at least one token");
  if (model.layout && static_cast<std::size_t>(steps) != model.layout->feature_count())
    throw UsageError("feature length " + std::to_string(steps) +
                     " does not match the model layout (" +
                     std::to_string(model.layout->feature_count()) + ")");
  const bool dropout = training_mode && model.dropout_rate > 0.0;
  std::vector<std::vector<Eigen::MatrixXd>> masks;
  if (dropout) masks = draw_masks(model, steps, batch, dropout_seed, first_sample);

  const std::size_t n_layers = model.layers.size();
  if (cache) {
    cache->batch = batch;
    cache->steps = steps;
    cache->inputs.assign(n_layers, {});
    cache->gates.assign(n_layers, {});
    cache->cells.assign(n_layers, {});
    cache->hiddens.assign(n_layers, {});
  }

  std::vector<Eigen::MatrixXd> sequence(steps);
  for (int t = 0; t < steps; ++t) sequence[t] = features.row(t);

  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto& layer = model.layers[l];
    const int w = layer.width();
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(w, batch);
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(w, batch);
    Eigen::MatrixXd z(4 * w, batch);
    Eigen::MatrixXd gates(4 * w, batch);
    for (int t = 0; t < steps; ++t) {
      z.noalias() = layer.input_weights * sequence[t];
      z.noalias() += layer.recurrent_weights * h;
      z.colwise() += layer.bias;
      gates.topRows(2 * w) = sigmoid(z.topRows(2 * w));
      gates.middleRows(2 * w, w) = tanh_of(z.middleRows(2 * w, w));
      gates.bottomRows(w) = sigmoid(z.bottomRows(w));
      c = gates.middleRows(w, w).cwiseProduct(c) +
          gates.topRows(w).cwiseProduct(gates.middleRows(2 * w, w));
      h = gates.bottomRows(w).cwiseProduct(tanh_of(c));
      if (cache) {
        cache->inputs[l].push_back(sequence[t]);
        cache->gates[l].push_back(gates);
        cache->cells[l].push_back(c);
        cache->hiddens[l].push_back(h);
      }
      sequence[t] = dropout ? Eigen::MatrixXd(h.cwiseProduct(masks[l][t])) : h;
    }
  }

  const Eigen::MatrixXd& head_input = sequence[steps - 1];
  Eigen::MatrixXd logits = model.head_weights * head_input;
  logits.colwise() += model.head_bias;
  Eigen::MatrixXd output = sigmoid(logits);
  if (cache) {
    cache->masks = std::move(masks);
    cache->head_input = head_input;
    cache->output = output;
  }
  return output;
}

std::vector<double> forward(const LstmModel& model,
                            std::span<const double> features,
                            bool training_mode, std::uint64_t dropout_seed) {
  const Eigen::MatrixXd column = Eigen::Map<const Eigen::VectorXd>(
      features.data(), static_cast<Eigen::Index>(features.size()));
  const Eigen::MatrixXd out = forward_batch(model, column, training_mode, dropout_seed);
  return {out.data(), out.data() + out.size()};
}

LstmModel backward(const LstmModel& model, const ForwardCache& cache,
                   const Eigen::MatrixXd& output_gradients) {
  const int steps = cache.steps;
  const int batch = cache.batch;
  const std::size_t n_layers = model.layers.size();
  if (output_gradients.rows() != model.output_size || output_gradients.cols() != batch)
    throw UsageError("output gradient shape does not match the cached batch");
  const bool dropout = !cache.masks.empty();
  LstmModel grads = zeros_like(model);

  const Eigen::MatrixXd head_delta =
      output_gradients.cwiseProduct(cache.output)
          .cwiseProduct((1.0 - cache.output.array()).matrix());
  grads.head_weights.noalias() = head_delta * cache.head_input.transpose();
  grads.head_bias = head_delta.rowwise().sum();

  // Gradient w.r.t. each layer's (unmasked) hidden output, per time step.
  std::vector<Eigen::MatrixXd> d_hidden(steps);
  const int top_width = model.widths.back();
  for (int t = 0; t < steps; ++t) d_hidden[t] = Eigen::MatrixXd::Zero(top_width, batch);
  d_hidden[steps - 1] = model.head_weights.transpose() * head_delta;
  if (dropout) d_hidden[steps - 1] = d_hidden[steps - 1].cwiseProduct(cache.masks[n_layers - 1][steps - 1]);

  for (std::size_t l = n_layers; l-- > 0;) {
    const auto& layer = model.layers[l];
    auto& g = grads.layers[l];
    const int w = layer.width();
    Eigen::MatrixXd dh_next = Eigen::MatrixXd::Zero(w, batch);
    Eigen::MatrixXd dc_next = Eigen::MatrixXd::Zero(w, batch);
    Eigen::MatrixXd dz(4 * w, batch);
    std::vector<Eigen::MatrixXd> d_below(l > 0 ? steps : 0);

    for (int t = steps; t-- > 0;) {
      const Eigen::MatrixXd& gates = cache.gates[l][t];
      const auto i = gates.topRows(w).array();
      const auto f = gates.middleRows(w, w).array();
      const auto cand = gates.middleRows(2 * w, w).array();
      const auto o = gates.bottomRows(w).array();
      const Eigen::ArrayXXd tanh_c = cache.cells[l][t].array().tanh();
      const Eigen::ArrayXXd c_prev = t > 0 ? Eigen::ArrayXXd(cache.cells[l][t - 1].array())
                                           : Eigen::ArrayXXd::Zero(w, batch);

      const Eigen::ArrayXXd dh = d_hidden[t].array() + dh_next.array();
      const Eigen::ArrayXXd dc = dh * o * (1.0 - tanh_c.square()) + dc_next.array();
      dz.topRows(w) = (dc * cand * i * (1.0 - i)).matrix();
      dz.middleRows(w, w) = (dc * c_prev * f * (1.0 - f)).matrix();
      dz.middleRows(2 * w, w) = (dc * i * (1.0 - cand.square())).matrix();
      dz.bottomRows(w) = (dh * tanh_c * o * (1.0 - o)).matrix();
      dc_next = (dc * f).matrix();

      g.input_weights.noalias() += dz * cache.inputs[l][t].transpose();
      if (t > 0) g.recurrent_weights.noalias() += dz * cache.hiddens[l][t - 1].transpose();
      g.bias += dz.rowwise().sum();
      dh_next.noalias() = layer.recurrent_weights.transpose() * dz;
      if (l > 0) {
        d_below[t] = layer.input_weights.transpose() * dz;
        if (dropout) d_below[t] = d_below[t].cwiseProduct(cache.masks[l - 1][t]);
      }
    }
    if (l > 0) d_hidden = std::move(d_below);
  }
  return grads;
}

double loss_mse(const Eigen::MatrixXd& predictions, const Eigen::MatrixXd& targets) {
  if (predictions.rows() != targets.rows() || predictions.cols() != targets.cols())
    throw UsageError("loss_mse: shape mismatch");
  if (predictions.size() == 0) throw UsageError("loss_mse: empty batch");
  return (predictions - targets).squaredNorm() / static_cast<double>(predictions.size());
}

Eigen::MatrixXd loss_mse_gradient(const Eigen::MatrixXd& predictions,
                                  const Eigen::MatrixXd& targets) {
  if (predictions.rows() != targets.rows() || predictions.cols() != targets.cols())
    throw UsageError("loss_mse_gradient: shape mismatch");
  return 2.0 * (predictions - targets) / static_cast<double>(predictions.size());
}

MreResult metric_mre(std::span<const double> predictions,
                     std::span<const double> targets) {
  if (predictions.size() != targets.size())
    throw UsageError("metric_mre: shape mismatch");
  MreResult result;
  double sum = 0.0;
  std::size_t admitted = 0;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    if (!(targets[k] > kMreTargetFloor)) {
      ++result.excluded;
      continue;
    }
    sum += std::abs(predictions[k] - targets[k]) / targets[k];
    ++admitted;
  }
  if (admitted == 0) throw UsageError("metric_mre: no admissible target index");
  result.value = sum / static_cast<double>(admitted);
  return result;
}

BatchGradient batch_gradient(const LstmModel& model,
                             const Eigen::MatrixXd& features,
                             const Eigen::MatrixXd& targets,
                             std::uint64_t dropout_seed,
                             std::uint64_t first_sample, Execution execution) {
  const Eigen::Index batch = features.cols();
  if (targets.cols() != batch || targets.rows() != model.output_size)
    throw UsageError("batch_gradient: target shape mismatch");
  const double normaliser = static_cast<double>(batch * targets.rows());

  if (execution == Execution::serial) {
    ForwardCache cache;
    const Eigen::MatrixXd out =
        forward_batch(model, features, true, dropout_seed, first_sample, &cache);
    BatchGradient result;
    result.loss = loss_mse(out, targets);
    result.gradients = backward(model, cache, loss_mse_gradient(out, targets));
    return result;
  }

  constexpr Eigen::Index kShard = 16;
  const Eigen::Index shards = (batch + kShard - 1) / kShard;
  std::vector<BatchGradient> partial(shards);
  std::vector<std::exception_ptr> errors(shards);
#pragma omp parallel for schedule(static)
  for (Eigen::Index s = 0; s < shards; ++s) {
    try {
      const Eigen::Index begin = s * kShard;
      const Eigen::Index count = std::min(kShard, batch - begin);
      ForwardCache cache;
      const Eigen::MatrixXd out =
          forward_batch(model, features.middleCols(begin, count), true, dropout_seed,
                        first_sample + static_cast<std::uint64_t>(begin), &cache);
      const Eigen::MatrixXd diff = out - targets.middleCols(begin, count);
      partial[s].loss = diff.squaredNorm() / normaliser;
      partial[s].gradients = backward(model, cache, 2.0 * diff / normaliser);
    } catch (...) {
      errors[s] = std::current_exception();
    }
  }
  for (auto& error : errors)
    if (error) std::rethrow_exception(error);

  BatchGradient result;
  result.gradients = std::move(partial[0].gradients);
  result.loss = partial[0].loss;
  auto total = parameter_spans(result.gradients);
  for (Eigen::Index s = 1; s < shards; ++s) {
    result.loss += partial[s].loss;
    auto part = parameter_spans(partial[s].gradients);
    for (std::size_t k = 0; k < total.size(); ++k)
      for (std::size_t e = 0; e < total[k].size(); ++e) total[k][e] += part[k][e];
  }
  return result;
}

void save_model(const LstmModel& model, const std::filesystem::path& path) {
  static_assert(std::endian::native == std::endian::little,
                "checkpoint writer assumes a little-endian host");
  model.validate();
  Writer out;
  for (char c : kMagic) out.put(c);
  out.put(LstmModel::kFormatVersion);
  out.put(static_cast<std::uint32_t>(model.widths.size()));
  for (int w : model.widths) out.put(static_cast<std::uint32_t>(w));
  out.put(static_cast<std::uint32_t>(model.input_size));
  out.put(static_cast<std::uint32_t>(model.output_size));
  out.put(model.dropout_rate);
  out.put(static_cast<std::uint8_t>(model.layout.has_value()));
  out.put(static_cast<std::uint32_t>(model.layout ? static_cast<int>(model.layout->kind) : 0));
  out.put(static_cast<std::uint32_t>(model.layout ? model.layout->n_spins : 0));
  out.put(static_cast<std::uint64_t>(model.parameter_count()));
  for (auto span : parameter_spans(model))
    for (double v : span) out.put(v);
  const std::uint64_t checksum = fnv1a(out.bytes().data(), out.bytes().size());
  out.put(checksum);

  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create '" + path.parent_path().string() + "': " + ec.message());
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot open '" + path.string() + "' for writing");
  file.write(reinterpret_cast<const char*>(out.bytes().data()),
             static_cast<std::streamsize>(out.bytes().size()));
  if (!file) throw IoError("failed writing '" + path.string() + "'");
}

LstmModel load_model(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(file)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < sizeof(kMagic) + sizeof(std::uint64_t))
    throw FormatError("checkpoint is truncated");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw FormatError("not a model checkpoint");
  const std::size_t payload = bytes.size() - sizeof(std::uint64_t);
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + payload, sizeof(stored));
  if (fnv1a(bytes.data(), payload) != stored)
    throw FormatError("checkpoint checksum mismatch (corrupt or truncated)");

  Reader in(bytes.data(), payload);
  for (std::size_t k = 0; k < sizeof(kMagic); ++k) in.get<char>();
  const auto version = in.get<std::uint32_t>();
  if (version != LstmModel::kFormatVersion)
    throw FormatError("checkpoint version " + std::to_string(version) +
                      " is not supported (expected " +
                      std::to_string(LstmModel::kFormatVersion) + ")");
  const auto n_layers = in.get<std::uint32_t>();
  if (n_layers == 0 || n_layers > 64) throw FormatError("implausible layer count");
  std::vector<int> widths;
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    const auto w = in.get<std::uint32_t>();
    if (w == 0 || w > (1u << 16)) throw FormatError("implausible layer width");
    widths.push_back(static_cast<int>(w));
  }
  const auto input_size = in.get<std::uint32_t>();
  const auto output_size = in.get<std::uint32_t>();
  const auto dropout = in.get<double>();
  const auto has_layout = in.get<std::uint8_t>();
  const auto layout_kind = in.get<std::uint32_t>();
  const auto layout_spins = in.get<std::uint32_t>();
  const auto count = in.get<std::uint64_t>();
  if (input_size == 0 || input_size > (1u << 16) || output_size == 0 ||
      output_size > (1u << 20))
    throw FormatError("implausible model io size");

  LstmModel model;
  try {
    model = allocate(widths, static_cast<int>(input_size),
                     static_cast<int>(output_size), dropout);
  } catch (const UsageError& e) {
    throw FormatError(std::string("invalid architecture: ") + e.what());
  }
  if (has_layout) {
    if (layout_kind > 3) throw FormatError("unknown layout kind");
    model.layout = Layout{static_cast<TopologyKind>(layout_kind),
                          static_cast<int>(layout_spins)};
  }
  if (count != model.parameter_count())
    throw FormatError("parameter count does not match the architecture");
  for (auto span : parameter_spans(model))
    for (double& v : span) v = in.get<double>();
  if (in.offset() != payload) throw FormatError("trailing bytes in checkpoint");
  try {
    model.validate();
  } catch (const UsageError& e) {
    throw FormatError(std::string("invalid checkpoint: ") + e.what());
  }
  return model;
}

}  // namespace qasched
