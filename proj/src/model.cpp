#include "ciu/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ciu/kernels.hpp"

namespace ciu {

namespace {

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void append_number(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g,", v);
  out += buf;
}

}  // namespace

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows, std::size_t cols) {
  Matrix m;
  m.cols = cols;
  for (const auto& r : rows) m.push_row(r);
  return m;
}

void Matrix::push_row(std::span<const double> values) {
  if (values.size() != cols) throw std::invalid_argument("Matrix::push_row: width mismatch");
  data.insert(data.end(), values.begin(), values.end());
  ++rows;
}

Matrix Predictor::batch_predict(const Matrix& inputs) const {
  if (inputs.cols != n_inputs())
    throw ModelError("dimension mismatch: model expects " + std::to_string(n_inputs()) + " inputs, got vectors of " +
                     std::to_string(inputs.cols));
  Matrix out = predict_rows(inputs);
  if (out.rows != inputs.rows || out.cols != n_outputs())
    throw ModelError("model returned " + std::to_string(out.rows) + "x" + std::to_string(out.cols) +
                     " outputs for a batch of " + std::to_string(inputs.rows));
  for (std::size_t r = 0; r < out.rows; ++r)
    for (std::size_t c = 0; c < out.cols; ++c)
      if (!std::isfinite(out(r, c)))
        throw ModelError("non-finite output at batch position " + std::to_string(r) + " (output " +
                         std::to_string(c) + ")");
  return out;
}

// ---------------------------------------------------------------------------

LinearModel::LinearModel(std::vector<std::vector<double>> weights, std::vector<double> bias) : bias_(std::move(bias)) {
  if (weights.empty() || weights.size() != bias_.size())
    throw ValidationError("linear model needs one weight row and one bias per output");
  n_inputs_ = weights.front().size();
  if (n_inputs_ == 0) throw ValidationError("linear model needs at least one input");
  for (const auto& row : weights) {
    if (row.size() != n_inputs_) throw ValidationError("linear model weight rows differ in length");
    for (double w : row)
      if (!std::isfinite(w)) throw ValidationError("linear model has a non-finite weight");
    weights_.insert(weights_.end(), row.begin(), row.end());
  }
  for (double b : bias_)
    if (!std::isfinite(b)) throw ValidationError("linear model has a non-finite bias");
}

std::string LinearModel::fingerprint() const {
  std::string text = "linear:" + std::to_string(n_inputs_) + ":";
  for (double w : weights_) append_number(text, w);
  text += "|";
  for (double b : bias_) append_number(text, b);
  return "linear-" + fnv1a_hex(text);
}

Matrix LinearModel::predict_rows(const Matrix& inputs) const {
  Matrix out(inputs.rows, n_outputs());
  kernels::affine_batch(weights_, bias_, inputs.data, n_inputs_, n_outputs(), out.data);
  return out;
}

// ---------------------------------------------------------------------------

TableModel::TableModel(std::vector<std::size_t> level_counts, std::map<Key, std::vector<double>> table)
    : level_counts_(std::move(level_counts)) {
  if (level_counts_.empty()) throw ValidationError("table model needs at least one input");
  std::size_t total = 1;
  for (auto n : level_counts_) {
    if (n < 2) throw ValidationError("table model inputs need at least 2 levels");
    total *= n;
  }
  if (table.empty()) throw ValidationError("table model is empty");
  n_outputs_ = table.begin()->second.size();
  if (n_outputs_ == 0) throw ValidationError("table model rows need at least one output");
  flat_.assign(total * n_outputs_, std::nan(""));
  std::vector<bool> filled(total, false);
  for (const auto& [key, outputs] : table) {
    if (key.size() != level_counts_.size()) throw ValidationError("table model key has the wrong arity");
    if (outputs.size() != n_outputs_) throw ValidationError("table model rows differ in output count");
    std::size_t index = 0;
    for (std::size_t i = 0; i < key.size(); ++i) {
      if (key[i] >= level_counts_[i]) throw ValidationError("table model key references an unknown level");
      index = index * level_counts_[i] + key[i];
    }
    filled[index] = true;
    std::copy(outputs.begin(), outputs.end(), flat_.begin() + static_cast<std::ptrdiff_t>(index * n_outputs_));
  }
  for (std::size_t i = 0; i < total; ++i) {
    if (filled[i]) continue;
    std::string tuple;
    std::size_t rest = i;
    std::vector<std::size_t> codes(level_counts_.size());
    for (std::size_t k = level_counts_.size(); k-- > 0;) {
      codes[k] = rest % level_counts_[k];
      rest /= level_counts_[k];
    }
    for (std::size_t k = 0; k < codes.size(); ++k) tuple += (k ? "," : "") + std::to_string(codes[k]);
    throw ValidationError("table model is not total: missing input tuple (" + tuple + ")");
  }
}

std::string TableModel::fingerprint() const {
  std::string text = "table:";
  for (auto n : level_counts_) text += std::to_string(n) + ",";
  text += "|";
  for (double v : flat_) append_number(text, v);
  return "table-" + fnv1a_hex(text);
}

Matrix TableModel::predict_rows(const Matrix& inputs) const {
  Matrix out(inputs.rows, n_outputs_);
  for (std::size_t r = 0; r < inputs.rows; ++r) {
    std::size_t index = 0;
    for (std::size_t k = 0; k < level_counts_.size(); ++k) {
      double v = inputs(r, k);
      double whole = 0.0;
      if (!(v >= 0) || std::modf(v, &whole) != 0.0 || v >= static_cast<double>(level_counts_[k]))
        throw ModelError("table model got non-code input " + std::to_string(v) + " at batch position " +
                         std::to_string(r));
      index = index * level_counts_[k] + static_cast<std::size_t>(v);
    }
    std::copy_n(flat_.begin() + static_cast<std::ptrdiff_t>(index * n_outputs_), n_outputs_, out.row(r).begin());
  }
  return out;
}

// ---------------------------------------------------------------------------

FunctionModel::FunctionModel(std::string name, std::size_t n_inputs, std::size_t n_outputs, Fn fn)
    : name_(std::move(name)), n_inputs_(n_inputs), n_outputs_(n_outputs), fn_(std::move(fn)) {}

Matrix FunctionModel::predict_rows(const Matrix& inputs) const {
  Matrix out(inputs.rows, n_outputs_);
  for (std::size_t r = 0; r < inputs.rows; ++r) {
    auto y = fn_(inputs.row(r));
    if (y.size() != n_outputs_) throw ModelError("model '" + name_ + "' returned the wrong output count");
    std::copy(y.begin(), y.end(), out.row(r).begin());
  }
  return out;
}

namespace builtin {

std::vector<double> deflategate(std::span<const double> x) {
  const double psi = x[0];
  const double size = x[1];
  const double grip = x[2];
  const double z = (psi - 10.5) / 1.5;
  const double s = 2.0 * size - 1.0;
  const double throwability = std::exp(-z * z) * (0.6 + 0.4 * grip) * (1.0 - 0.5 * s * s);
  const double compliance = 1.0 / (1.0 + std::exp(-4.0 * (psi - 12.5)));
  return {throwability, compliance};
}

std::vector<double> mug(std::span<const double> x) {
  const double ideal = x[1] < 0.5 ? 80.0 : 350.0;
  const double z = (x[0] - ideal) / (0.4 * ideal);
  return {std::exp(-z * z)};
}

std::unique_ptr<Predictor> make(const std::string& name) {
  if (name == "deflategate") return std::make_unique<FunctionModel>("builtin-deflategate-v1", 3, 2, deflategate);
  if (name == "mug") return std::make_unique<FunctionModel>("builtin-mug-v1", 2, 1, mug);
  throw ValidationError("unknown builtin model '" + name + "' (known: deflategate, mug)");
}

}  // namespace builtin

// ---------------------------------------------------------------------------

namespace {

std::vector<std::vector<double>> numeric_rows(const nlohmann::json& j, const char* what) {
  if (!j.is_array()) throw ValidationError(std::string("model field '") + what + "' must be an array");
  std::vector<std::vector<double>> rows;
  for (const auto& r : j) {
    if (!r.is_array()) throw ValidationError(std::string("model field '") + what + "' must be an array of arrays");
    std::vector<double> row;
    for (const auto& v : r) {
      if (!v.is_number()) throw ValidationError(std::string("model field '") + what + "' holds a non-number");
      row.push_back(v.get<double>());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::size_t table_code(const FeatureDescriptor& f, const nlohmann::json& v) {
  if (v.is_string()) {
    auto code = f.level_code(v.get<std::string>());
    if (!code) throw ValidationError("table row uses unknown level '" + v.get<std::string>() + "' for '" + f.name + "'");
    return *code;
  }
  if (v.is_number_unsigned() || v.is_number_integer()) {
    auto code = v.get<long long>();
    if (code < 0 || static_cast<std::size_t>(code) >= f.level_count())
      throw ValidationError("table row uses out-of-range code for '" + f.name + "'");
    return static_cast<std::size_t>(code);
  }
  throw ValidationError("table row inputs must be level names or integer codes");
}

}  // namespace

std::unique_ptr<Predictor> load_model(const nlohmann::json& spec, const FeatureSpace& space,
                                      const std::filesystem::path& base_dir, std::chrono::milliseconds timeout) {
  if (!spec.is_object() || !spec.contains("kind") || !spec["kind"].is_string())
    throw ValidationError("model description needs a string 'kind'");
  const auto kind = spec["kind"].get<std::string>();
  std::unique_ptr<Predictor> model;

  if (kind == "linear") {
    if (!spec.contains("weights")) throw ValidationError("linear model needs 'weights'");
    auto weights = numeric_rows(spec["weights"], "weights");
    std::vector<double> bias(weights.size(), 0.0);
    if (spec.contains("bias")) {
      bias.clear();
      for (const auto& b : spec["bias"]) {
        if (!b.is_number()) throw ValidationError("model field 'bias' holds a non-number");
        bias.push_back(b.get<double>());
      }
    }
    model = std::make_unique<LinearModel>(std::move(weights), std::move(bias));
    if (model->n_inputs() != space.size())
      throw ValidationError("linear model has " + std::to_string(model->n_inputs()) +
                            " weights per output but the feature space declares " + std::to_string(space.size()));
  } else if (kind == "table") {
    std::vector<std::size_t> counts;
    for (const auto& f : space.features()) {
      if (!f.is_categorical()) throw ValidationError("table model requires categorical features; '" + f.name + "' is continuous");
      counts.push_back(f.level_count());
    }
    if (!spec.contains("rows") || !spec["rows"].is_array()) throw ValidationError("table model needs 'rows'");
    std::map<TableModel::Key, std::vector<double>> table;
    for (const auto& row : spec["rows"]) {
      if (!row.contains("inputs") || !row.contains("outputs"))
        throw ValidationError("table rows need 'inputs' and 'outputs'");
      const auto& in = row["inputs"];
      if (!in.is_array() || in.size() != space.size())
        throw ValidationError("table row inputs must list one level per feature");
      TableModel::Key key;
      for (std::size_t i = 0; i < in.size(); ++i) key.push_back(table_code(space[i], in[i]));
      std::vector<double> outputs;
      for (const auto& v : row["outputs"]) {
        if (!v.is_number()) throw ValidationError("table row outputs must be numbers");
        outputs.push_back(v.get<double>());
      }
      if (!table.emplace(key, std::move(outputs)).second) throw ValidationError("table model lists a tuple twice");
    }
    model = std::make_unique<TableModel>(std::move(counts), std::move(table));
  } else if (kind == "builtin") {
    if (!spec.contains("name") || !spec["name"].is_string()) throw ValidationError("builtin model needs a 'name'");
    model = builtin::make(spec["name"].get<std::string>());
    if (model->n_inputs() != space.size())
      throw ValidationError("builtin model takes " + std::to_string(model->n_inputs()) +
                            " inputs but the feature space declares " + std::to_string(space.size()));
  } else if (kind == "external") {
    ExternalOptions opts;
    if (!spec.contains("command") || !spec["command"].is_array() || spec["command"].empty())
      throw ValidationError("external model needs a non-empty 'command' array");
    for (const auto& a : spec["command"]) {
      if (!a.is_string()) throw ValidationError("external model command entries must be strings");
      opts.command.push_back(a.get<std::string>());
    }
    opts.working_dir = base_dir;
    opts.timeout = timeout;
    if (spec.contains("timeout_secs") && spec["timeout_secs"].is_number())
      opts.timeout = std::chrono::milliseconds(static_cast<long long>(spec["timeout_secs"].get<double>() * 1000.0));
    model = std::make_unique<ExternalModel>(std::move(opts));
    if (model->n_inputs() != space.size())
      throw ModelError("adapter reports n_inputs=" + std::to_string(model->n_inputs()) + " but the feature space declares " +
                       std::to_string(space.size()));
  } else {
    throw ValidationError("unknown model kind '" + kind + "' (expected linear, table, builtin or external)");
  }
  return model;
}

std::unique_ptr<Predictor> load_model_file(const std::filesystem::path& path, const FeatureSpace& space) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open model description '" + path.string() + "'");
  nlohmann::json spec;
  try {
    spec = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("model description '" + path.string() + "' does not parse: " + e.what());
  }
  return load_model(spec, space, path.parent_path());
}

}  // namespace ciu
