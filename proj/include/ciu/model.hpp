#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "ciu/core.hpp"
#include "json.hpp"

namespace ciu {

// Row-major batch of vectors (probe inputs or model outputs).
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t rows_, std::size_t cols_) : rows(rows_), cols(cols_), data(rows_ * cols_, 0.0) {}
  static Matrix from_rows(const std::vector<std::vector<double>>& rows, std::size_t cols);

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  void push_row(std::span<const double> values);

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

// Black-box predictor. Batched prediction is the only entry point.
class Predictor {
 public:
  virtual ~Predictor() = default;

  virtual std::size_t n_inputs() const = 0;
  virtual std::size_t n_outputs() const = 0;
  virtual std::string fingerprint() const = 0;
  // False when calls must be funnelled through one queue (external adapters).
  virtual bool concurrent_safe() const { return true; }

  // Checks input arity and output finiteness around predict_rows().
  Matrix batch_predict(const Matrix& inputs) const;

 protected:
  virtual Matrix predict_rows(const Matrix& inputs) const = 0;
};

class LinearModel final : public Predictor {
 public:
  // weights: n_outputs rows of n_inputs entries.
  LinearModel(std::vector<std::vector<double>> weights, std::vector<double> bias);

  std::size_t n_inputs() const override { return n_inputs_; }
  std::size_t n_outputs() const override { return bias_.size(); }
  std::string fingerprint() const override;
  double weight(std::size_t output, std::size_t input) const { return weights_[output * n_inputs_ + input]; }
  double bias(std::size_t output) const { return bias_[output]; }

 protected:
  Matrix predict_rows(const Matrix& inputs) const override;

 private:
  std::size_t n_inputs_ = 0;
  std::vector<double> weights_;  // row-major n_outputs x n_inputs
  std::vector<double> bias_;
};

// Exhaustive lookup over a categorical input space; inputs are level codes.
class TableModel final : public Predictor {
 public:
  using Key = std::vector<std::size_t>;

  TableModel(std::vector<std::size_t> level_counts, std::map<Key, std::vector<double>> table);

  std::size_t n_inputs() const override { return level_counts_.size(); }
  std::size_t n_outputs() const override { return n_outputs_; }
  std::string fingerprint() const override;

 protected:
  Matrix predict_rows(const Matrix& inputs) const override;

 private:
  std::vector<std::size_t> level_counts_;
  std::size_t n_outputs_ = 0;
  std::vector<double> flat_;  // mixed-radix index -> outputs
};

// Wraps a per-vector function. Used for the bundled non-linear demo models.
class FunctionModel final : public Predictor {
 public:
  using Fn = std::function<std::vector<double>(std::span<const double>)>;

  FunctionModel(std::string name, std::size_t n_inputs, std::size_t n_outputs, Fn fn);

  std::size_t n_inputs() const override { return n_inputs_; }
  std::size_t n_outputs() const override { return n_outputs_; }
  std::string fingerprint() const override { return name_; }

 protected:
  Matrix predict_rows(const Matrix& inputs) const override;

 private:
  std::string name_;
  std::size_t n_inputs_;
  std::size_t n_outputs_;
  Fn fn_;
};

namespace builtin {
// Ball model over (psi in [8,16], size in [0,1], grip in [0,1]).
// Output 0 throwability peaks at 10.5 psi and grows with grip; output 1
// rule compliance is a steep sigmoid centred on the 12.5 psi standard.
std::vector<double> deflategate(std::span<const double> x);
// Mug suitability over (size_ml in [50,500], beverage code: 0 espresso,
// 1 latte). Peaks at the beverage's ideal size.
std::vector<double> mug(std::span<const double> x);

std::unique_ptr<Predictor> make(const std::string& name);
}  // namespace builtin

struct ExternalOptions {
  std::vector<std::string> command;
  std::filesystem::path working_dir;  // empty: inherit
  std::chrono::milliseconds timeout{30000};
};

// Timeout from CIU_EXPLAIN_TIMEOUT_SECS (seconds, fractional allowed) or 30 s.
std::chrono::milliseconds default_external_timeout();

// Client side of the line-delimited JSON adapter protocol. Launches the
// adapter, handshakes in the constructor and says bye in the destructor.
// Requests are serialized through an internal mutex.
class ExternalModel final : public Predictor {
 public:
  explicit ExternalModel(ExternalOptions options);
  ~ExternalModel() override;
  ExternalModel(const ExternalModel&) = delete;
  ExternalModel& operator=(const ExternalModel&) = delete;

  std::size_t n_inputs() const override { return n_inputs_; }
  std::size_t n_outputs() const override { return n_outputs_; }
  std::string fingerprint() const override;
  bool concurrent_safe() const override { return false; }

  std::size_t calls() const { return calls_; }

 protected:
  Matrix predict_rows(const Matrix& inputs) const override;

 private:
  void send_line(const std::string& line) const;
  std::string read_line() const;
  nlohmann::json request(const nlohmann::json& message) const;
  void shutdown() noexcept;

  ExternalOptions options_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::size_t n_inputs_ = 0;
  std::size_t n_outputs_ = 0;
  mutable std::string buffer_;
  mutable std::mutex mutex_;
  mutable std::size_t calls_ = 0;
};

// Parses one adapter reply line. Bare NaN/Infinity tokens become null so a
// misbehaving adapter surfaces as a non-finite output, not a parse error.
nlohmann::json parse_protocol_line(const std::string& line);

// Builds a predictor from a model description. kind is one of linear, table,
// builtin, external; checks arity against the feature space. Relative
// external commands run inside base_dir.
std::unique_ptr<Predictor> load_model(const nlohmann::json& spec, const FeatureSpace& space,
                                      const std::filesystem::path& base_dir = {},
                                      std::chrono::milliseconds timeout = default_external_timeout());
std::unique_ptr<Predictor> load_model_file(const std::filesystem::path& path, const FeatureSpace& space);

}  // namespace ciu
