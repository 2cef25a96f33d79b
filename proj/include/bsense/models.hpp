#pragma once

// Kernel SVM classification (one-vs-one) and epsilon-SVR regression trained
// with the in-tree SMO solver, plus feature standardization and a JSON model
// format.

#include <cstdint>
#include <string>
#include <vector>

namespace bsense {

using Matrix = std::vector<std::vector<double>>;

struct TrainConfig {
    double C = 10.0;
    std::string kernel = "rbf"; // "rbf" or "linear"
    double gamma = 0.0;         // <= 0 selects the scale rule 1/(d * var(X))
    double epsilon = 0.1;       // SVR tube half-width
    double tolerance = 1e-3;    // SMO optimality gap
    std::size_t max_passes = 10; // iteration budget = max_passes * n
    std::uint64_t seed = 1;     // used for CV splits in grid search
};

struct KernelSpec {
    std::string type = "rbf";
    double gamma = 0.0; // resolved numeric value (0 for linear)
};

struct Scaler {
    std::vector<double> means;
    std::vector<double> stds;               // zero-variance columns get 1.0
    std::vector<std::uint8_t> zero_variance; // flags, kept in memory only
};

Scaler fit_scaler(const Matrix& X);
std::vector<double> apply_scaler(const Scaler& s, const std::vector<double>& x);

// One pairwise soft-margin machine; decision > 0 votes class_a.
struct BinaryMachine {
    int class_a = 0;
    int class_b = 0;
    Matrix sv;                // standardized support vectors
    std::vector<double> coef; // alpha_i * y_i
    double bias = 0.0;
};

struct SvmModel {
    std::vector<int> classes; // ascending
    KernelSpec kernel;
    double C = 0.0;
    Scaler scaler;
    std::string schema_hash;
    std::vector<BinaryMachine> machines; // k(k-1)/2 in (a,b) class order
};

struct TargetTransform {
    double mean = 0.0;
    double std = 1.0;
};

struct SvrModel {
    std::string target_name; // e.g. "x", "y", or a rating tag
    KernelSpec kernel;
    double C = 0.0;
    double epsilon = 0.0;
    Scaler scaler;
    std::string schema_hash;
    Matrix sv;
    std::vector<double> coef; // alpha_i - alpha*_i
    double bias = 0.0;
    TargetTransform target_transform; // bookkeeping from rating normalization
};

struct ClassifyResult {
    int label = 0;
    std::vector<int> votes;              // per class, aligned with model.classes
    std::vector<double> pair_decisions;  // aligned with model.machines
};

// Training. Features are standardized internally; the scaler is stored in the
// model. `schema_hash` ties the model to the feature layout it was built for.
SvmModel train_svc(const Matrix& X, const std::vector<int>& y, const TrainConfig& cfg,
                   const std::string& schema_hash = "");
SvrModel train_svr(const Matrix& X, const std::vector<double>& y, const TrainConfig& cfg,
                   const std::string& schema_hash = "", const std::string& target_name = "",
                   TargetTransform transform = {});

// Prediction. The schema-checked overloads reject a mismatched feature layout.
ClassifyResult predict_svc(const SvmModel& m, const std::vector<double>& x);
ClassifyResult predict_svc(const SvmModel& m, const std::vector<double>& x,
                           const std::string& schema_hash);
double predict_svr(const SvrModel& m, const std::vector<double>& x);
double predict_svr(const SvrModel& m, const std::vector<double>& x,
                   const std::string& schema_hash);

// Serialization to the versioned JSON model format. `expected_schema_hash`
// (when non-empty) must match the stored hash.
void save_model(const SvmModel& m, const std::string& path);
void save_model(const SvrModel& m, const std::string& path);
SvmModel load_svc(const std::string& path, const std::string& expected_schema_hash = "");
SvrModel load_svr(const std::string& path, const std::string& expected_schema_hash = "");

// Cross-validated grid search over C x gamma (see TrainConfig defaults for the
// fixed grid). Returns the best config by accuracy (classification) or MAE
// (regression).
TrainConfig grid_search_svc(const Matrix& X, const std::vector<int>& y, TrainConfig base,
                            std::size_t folds = 5);
TrainConfig grid_search_svr(const Matrix& X, const std::vector<double>& y, TrainConfig base,
                            std::size_t folds = 5);

// Kernel evaluation shared with tests and downstream modules.
double kernel_eval(const KernelSpec& k, const std::vector<double>& a,
                   const std::vector<double>& b);

} // namespace bsense
