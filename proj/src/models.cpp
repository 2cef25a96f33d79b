#include "bsense/models.hpp"

#include "bsense/errors.hpp"
#include "bsense/smo.hpp"
#include "bsense/util.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

namespace bsense {

using ojson = nlohmann::ordered_json;

namespace {

void check_matrix(const Matrix& X, std::size_t min_rows, const char* who) {
    if (X.size() < min_rows)
        throw std::invalid_argument(std::string(who) + ": too few samples");
    const std::size_t d = X.front().size();
    if (d == 0) throw std::invalid_argument(std::string(who) + ": empty feature vectors");
    for (const auto& row : X)
        if (row.size() != d)
            throw std::invalid_argument(std::string(who) + ": ragged feature matrix");
}

Matrix scale_all(const Scaler& s, const Matrix& X) {
    Matrix out;
    out.reserve(X.size());
    for (const auto& row : X) out.push_back(apply_scaler(s, row));
    return out;
}

// gamma "scale" rule: 1 / (d * var) with var taken over every entry of X.
double scale_gamma(const Matrix& X) {
    const std::size_t d = X.front().size();
    double sum = 0.0, sum2 = 0.0, n = 0.0;
    for (const auto& row : X)
        for (double v : row) {
            sum += v;
            sum2 += v * v;
            n += 1.0;
        }
    const double mean = sum / n;
    double var = sum2 / n - mean * mean;
    if (!(var > 1e-12)) var = 1.0;
    return 1.0 / (static_cast<double>(d) * var);
}

KernelSpec resolve_kernel(const TrainConfig& cfg, const Matrix& Xs) {
    KernelSpec k;
    if (cfg.kernel == "linear") {
        k.type = "linear";
        k.gamma = 0.0;
    } else if (cfg.kernel == "rbf") {
        k.type = "rbf";
        k.gamma = cfg.gamma > 0.0 ? cfg.gamma : scale_gamma(Xs);
    } else {
        throw ConfigError("unknown kernel type: " + cfg.kernel);
    }
    return k;
}

void check_config(const TrainConfig& cfg) {
    if (!(cfg.C > 0.0)) throw std::invalid_argument("train: C must be > 0");
    if (!(cfg.epsilon >= 0.0)) throw std::invalid_argument("train: epsilon must be >= 0");
    if (!(cfg.tolerance > 0.0)) throw std::invalid_argument("train: tolerance must be > 0");
}

std::vector<double> kernel_matrix(const KernelSpec& k, const Matrix& X) {
    const std::size_t n = X.size();
    std::vector<double> K(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        K[i * n + i] = kernel_eval(k, X[i], X[i]);
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = kernel_eval(k, X[i], X[j]);
            K[i * n + j] = v;
            K[j * n + i] = v;
        }
    }
    return K;
}

double machine_decision(const KernelSpec& kernel, const BinaryMachine& m,
                        const std::vector<double>& xs) {
    double acc = m.bias;
    for (std::size_t i = 0; i < m.sv.size(); ++i)
        acc += m.coef[i] * kernel_eval(kernel, m.sv[i], xs);
    return acc;
}

constexpr double kSvThreshold = 1e-12;

} // namespace

double kernel_eval(const KernelSpec& k, const std::vector<double>& a,
                   const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("kernel_eval: dimension mismatch");
    if (k.type == "linear") {
        double dot = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
        return dot;
    }
    double d2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        d2 += d * d;
    }
    return std::exp(-k.gamma * d2);
}

Scaler fit_scaler(const Matrix& X) {
    check_matrix(X, 2, "fit_scaler");
    const std::size_t d = X.front().size();
    const double n = static_cast<double>(X.size());
    Scaler s;
    s.means.assign(d, 0.0);
    s.stds.assign(d, 0.0);
    s.zero_variance.assign(d, 0);
    for (const auto& row : X)
        for (std::size_t j = 0; j < d; ++j) s.means[j] += row[j];
    for (std::size_t j = 0; j < d; ++j) s.means[j] /= n;
    for (const auto& row : X)
        for (std::size_t j = 0; j < d; ++j) {
            const double dv = row[j] - s.means[j];
            s.stds[j] += dv * dv;
        }
    for (std::size_t j = 0; j < d; ++j) {
        s.stds[j] = std::sqrt(s.stds[j] / n);
        if (!(s.stds[j] > 0.0)) {
            s.stds[j] = 1.0;
            s.zero_variance[j] = 1;
        }
    }
    return s;
}

std::vector<double> apply_scaler(const Scaler& s, const std::vector<double>& x) {
    if (x.size() != s.means.size())
        throw SchemaError("apply_scaler: expected " + std::to_string(s.means.size()) +
                          " features, got " + std::to_string(x.size()));
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - s.means[j]) / s.stds[j];
    return out;
}

SvmModel train_svc(const Matrix& X, const std::vector<int>& y, const TrainConfig& cfg,
                   const std::string& schema_hash) {
    check_matrix(X, 2, "train_svc");
    check_config(cfg);
    if (y.size() != X.size()) throw std::invalid_argument("train_svc: label count mismatch");

    std::set<int> label_set(y.begin(), y.end());
    if (label_set.size() < 2) throw std::invalid_argument("train_svc: need at least 2 classes");

    SvmModel model;
    model.classes.assign(label_set.begin(), label_set.end());
    model.C = cfg.C;
    model.schema_hash = schema_hash;
    model.scaler = fit_scaler(X);
    const Matrix Xs = scale_all(model.scaler, X);
    model.kernel = resolve_kernel(cfg, Xs);

    for (std::size_t a = 0; a < model.classes.size(); ++a) {
        for (std::size_t b = a + 1; b < model.classes.size(); ++b) {
            const int ca = model.classes[a], cb = model.classes[b];
            std::vector<std::size_t> idx;
            for (std::size_t i = 0; i < y.size(); ++i)
                if (y[i] == ca || y[i] == cb) idx.push_back(i);

            const std::size_t n = idx.size();
            Matrix sub(n);
            std::vector<double> ysub(n);
            for (std::size_t i = 0; i < n; ++i) {
                sub[i] = Xs[idx[i]];
                ysub[i] = y[idx[i]] == ca ? 1.0 : -1.0;
            }

            auto K = kernel_matrix(model.kernel, sub);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) K[i * n + j] *= ysub[i] * ysub[j];
            smo::DenseQ Q(n, std::move(K));
            const std::vector<double> p(n, -1.0);

            auto res = smo::solve(Q, p, ysub, cfg.C, cfg.tolerance, cfg.max_passes * n);

            BinaryMachine bm;
            bm.class_a = ca;
            bm.class_b = cb;
            bm.bias = res.bias;
            for (std::size_t i = 0; i < n; ++i) {
                if (res.alpha[i] > kSvThreshold) {
                    bm.sv.push_back(sub[i]);
                    bm.coef.push_back(res.alpha[i] * ysub[i]);
                }
            }
            model.machines.push_back(std::move(bm));
        }
    }
    return model;
}

ClassifyResult predict_svc(const SvmModel& m, const std::vector<double>& x) {
    const auto xs = apply_scaler(m.scaler, x);

    ClassifyResult r;
    r.votes.assign(m.classes.size(), 0);
    std::vector<double> margin_sum(m.classes.size(), 0.0);

    auto class_index = [&](int c) {
        return static_cast<std::size_t>(
            std::lower_bound(m.classes.begin(), m.classes.end(), c) - m.classes.begin());
    };

    for (const auto& bm : m.machines) {
        const double d = machine_decision(m.kernel, bm, xs);
        r.pair_decisions.push_back(d);
        // decision >= 0 votes the first class of the pair
        const int winner = d >= 0.0 ? bm.class_a : bm.class_b;
        r.votes[class_index(winner)] += 1;
        margin_sum[class_index(bm.class_a)] += std::abs(d);
        margin_sum[class_index(bm.class_b)] += std::abs(d);
    }

    // majority vote; ties by the larger summed absolute margin, then class order
    std::size_t best = 0;
    for (std::size_t c = 1; c < m.classes.size(); ++c) {
        if (r.votes[c] > r.votes[best] ||
            (r.votes[c] == r.votes[best] && margin_sum[c] > margin_sum[best]))
            best = c;
    }
    r.label = m.classes[best];
    return r;
}

ClassifyResult predict_svc(const SvmModel& m, const std::vector<double>& x,
                           const std::string& schema_hash) {
    if (m.schema_hash != schema_hash)
        throw SchemaError("feature schema mismatch: model has " + m.schema_hash + ", input has " +
                          schema_hash);
    return predict_svc(m, x);
}

SvrModel train_svr(const Matrix& X, const std::vector<double>& y, const TrainConfig& cfg,
                   const std::string& schema_hash, const std::string& target_name,
                   TargetTransform transform) {
    check_matrix(X, 2, "train_svr");
    check_config(cfg);
    if (y.size() != X.size()) throw std::invalid_argument("train_svr: target count mismatch");

    SvrModel model;
    model.target_name = target_name;
    model.C = cfg.C;
    model.epsilon = cfg.epsilon;
    model.schema_hash = schema_hash;
    model.target_transform = transform;
    model.scaler = fit_scaler(X);
    const Matrix Xs = scale_all(model.scaler, X);
    model.kernel = resolve_kernel(cfg, Xs);

    const std::size_t n = Xs.size();
    smo::RegressionQ Q(n, kernel_matrix(model.kernel, Xs));
    std::vector<double> p(2 * n), ys(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        p[i] = cfg.epsilon - y[i];
        ys[i] = 1.0;
        p[n + i] = cfg.epsilon + y[i];
        ys[n + i] = -1.0;
    }

    auto res = smo::solve(Q, p, ys, cfg.C, cfg.tolerance, cfg.max_passes * 2 * n);
    model.bias = res.bias;
    for (std::size_t i = 0; i < n; ++i) {
        const double beta = res.alpha[i] - res.alpha[n + i];
        if (std::abs(beta) > kSvThreshold) {
            model.sv.push_back(Xs[i]);
            model.coef.push_back(beta);
        }
    }
    return model;
}

double predict_svr(const SvrModel& m, const std::vector<double>& x) {
    const auto xs = apply_scaler(m.scaler, x);
    double acc = m.bias;
    for (std::size_t i = 0; i < m.sv.size(); ++i)
        acc += m.coef[i] * kernel_eval(m.kernel, m.sv[i], xs);
    return acc;
}

double predict_svr(const SvrModel& m, const std::vector<double>& x,
                   const std::string& schema_hash) {
    if (m.schema_hash != schema_hash)
        throw SchemaError("feature schema mismatch: model has " + m.schema_hash + ", input has " +
                          schema_hash);
    return predict_svr(m, x);
}

namespace {

constexpr int kModelVersion = 1;

ojson kernel_to_json(const KernelSpec& k) { return ojson{{"type", k.type}, {"gamma", k.gamma}}; }

KernelSpec kernel_from_json(const ojson& j) {
    KernelSpec k;
    k.type = j.at("type").get<std::string>();
    k.gamma = j.at("gamma").get<double>();
    if (k.type != "rbf" && k.type != "linear")
        throw ParseError("model file: unknown kernel type " + k.type);
    return k;
}

ojson scaler_to_json(const Scaler& s) {
    return ojson{{"means", s.means}, {"stds", s.stds}};
}

Scaler scaler_from_json(const ojson& j) {
    Scaler s;
    s.means = j.at("means").get<std::vector<double>>();
    s.stds = j.at("stds").get<std::vector<double>>();
    if (s.means.size() != s.stds.size())
        throw ParseError("model file: scaler means/stds length mismatch");
    s.zero_variance.assign(s.means.size(), 0);
    return s;
}

void write_json(const ojson& j, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write model file: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw ConfigError("failed writing model file: " + path);
}

ojson read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open model file: " + path);
    try {
        return ojson::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("model file " + path + ": " + e.what());
    }
}

void check_header(const ojson& j, const std::string& path, const std::string& expected_task,
                  const std::string& expected_hash) {
    int version;
    std::string task;
    try {
        version = j.at("version").get<int>();
        task = j.at("task").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("model file " + path + ": " + e.what());
    }
    if (version != kModelVersion)
        throw ConfigError("model file " + path + ": unsupported version " +
                          std::to_string(version) + " (expected " +
                          std::to_string(kModelVersion) + ")");
    if (task != expected_task)
        throw ConfigError("model file " + path + ": task is '" + task + "', expected '" +
                          expected_task + "'");
    if (!expected_hash.empty()) {
        const auto stored = j.at("schema_hash").get<std::string>();
        if (stored != expected_hash)
            throw SchemaError("model file " + path + ": schema hash " + stored +
                              " does not match expected " + expected_hash);
    }
}

} // namespace

void save_model(const SvmModel& m, const std::string& path) {
    ojson j;
    j["version"] = kModelVersion;
    j["task"] = "classify";
    j["schema_hash"] = m.schema_hash;
    j["kernel"] = kernel_to_json(m.kernel);
    j["C"] = m.C;
    j["epsilon"] = 0.0;
    j["scaler"] = scaler_to_json(m.scaler);
    ojson machines = ojson::array();
    for (const auto& bm : m.machines) {
        machines.push_back(ojson{{"classes", {bm.class_a, bm.class_b}},
                                 {"sv", bm.sv},
                                 {"coef", bm.coef},
                                 {"bias", bm.bias}});
    }
    j["machines"] = std::move(machines);
    j["target_transform"] = ojson{{"mean", 0.0}, {"std", 1.0}};
    write_json(j, path);
}

void save_model(const SvrModel& m, const std::string& path) {
    ojson j;
    j["version"] = kModelVersion;
    j["task"] = "regress";
    j["schema_hash"] = m.schema_hash;
    j["kernel"] = kernel_to_json(m.kernel);
    j["C"] = m.C;
    j["epsilon"] = m.epsilon;
    j["scaler"] = scaler_to_json(m.scaler);
    j["machines"] = ojson::array(
        {ojson{{"axis", m.target_name}, {"sv", m.sv}, {"coef", m.coef}, {"bias", m.bias}}});
    j["target_transform"] = ojson{{"mean", m.target_transform.mean}, {"std", m.target_transform.std}};
    write_json(j, path);
}

SvmModel load_svc(const std::string& path, const std::string& expected_schema_hash) {
    const ojson j = read_json(path);
    check_header(j, path, "classify", expected_schema_hash);
    try {
        SvmModel m;
        m.schema_hash = j.at("schema_hash").get<std::string>();
        m.kernel = kernel_from_json(j.at("kernel"));
        m.C = j.at("C").get<double>();
        m.scaler = scaler_from_json(j.at("scaler"));
        std::set<int> classes;
        for (const auto& jm : j.at("machines")) {
            BinaryMachine bm;
            const auto& pair = jm.at("classes");
            if (pair.size() != 2) throw ParseError("model file: machine class pair malformed");
            bm.class_a = pair[0].get<int>();
            bm.class_b = pair[1].get<int>();
            bm.sv = jm.at("sv").get<Matrix>();
            bm.coef = jm.at("coef").get<std::vector<double>>();
            bm.bias = jm.at("bias").get<double>();
            if (bm.sv.size() != bm.coef.size())
                throw ParseError("model file: sv/coef length mismatch");
            for (const auto& row : bm.sv)
                if (row.size() != m.scaler.means.size())
                    throw ParseError("model file: support vector width mismatch");
            classes.insert(bm.class_a);
            classes.insert(bm.class_b);
            m.machines.push_back(std::move(bm));
        }
        m.classes.assign(classes.begin(), classes.end());
        if (m.classes.size() < 2) throw ParseError("model file: fewer than 2 classes");
        const std::size_t k = m.classes.size();
        if (m.machines.size() != k * (k - 1) / 2)
            throw ParseError("model file: machine count does not match class count");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("model file " + path + ": " + e.what());
    }
}

SvrModel load_svr(const std::string& path, const std::string& expected_schema_hash) {
    const ojson j = read_json(path);
    check_header(j, path, "regress", expected_schema_hash);
    try {
        SvrModel m;
        m.schema_hash = j.at("schema_hash").get<std::string>();
        m.kernel = kernel_from_json(j.at("kernel"));
        m.C = j.at("C").get<double>();
        m.epsilon = j.at("epsilon").get<double>();
        m.scaler = scaler_from_json(j.at("scaler"));
        const auto& machines = j.at("machines");
        if (machines.size() != 1) throw ParseError("model file: regressor needs one machine");
        const auto& jm = machines[0];
        m.target_name = jm.at("axis").get<std::string>();
        m.sv = jm.at("sv").get<Matrix>();
        m.coef = jm.at("coef").get<std::vector<double>>();
        m.bias = jm.at("bias").get<double>();
        if (m.sv.size() != m.coef.size()) throw ParseError("model file: sv/coef length mismatch");
        for (const auto& row : m.sv)
            if (row.size() != m.scaler.means.size())
                throw ParseError("model file: support vector width mismatch");
        m.target_transform.mean = j.at("target_transform").at("mean").get<double>();
        m.target_transform.std = j.at("target_transform").at("std").get<double>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("model file " + path + ": " + e.what());
    }
}

namespace {

// Deterministic k-fold assignment; classification folds are stratified so
// every fold sees every class where possible.
std::vector<std::size_t> fold_assignment(std::size_t n, std::size_t folds, std::uint64_t seed,
                                         const std::vector<int>* labels) {
    std::vector<std::size_t> fold_of(n);
    Rng rng(seed);
    if (labels) {
        std::map<int, std::vector<std::size_t>> by_class;
        for (std::size_t i = 0; i < n; ++i) by_class[(*labels)[i]].push_back(i);
        std::size_t next = 0;
        for (auto& [c, idx] : by_class) {
            (void)c;
            for (std::size_t i = idx.size(); i > 1; --i)
                std::swap(idx[i - 1], idx[rng.uniform_int(0, static_cast<int>(i - 1))]);
            for (std::size_t i = 0; i < idx.size(); ++i) fold_of[idx[i]] = (next + i) % folds;
            next += idx.size();
        }
    } else {
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        for (std::size_t i = n; i > 1; --i)
            std::swap(idx[i - 1], idx[rng.uniform_int(0, static_cast<int>(i - 1))]);
        for (std::size_t i = 0; i < n; ++i) fold_of[idx[i]] = i % folds;
    }
    return fold_of;
}

std::vector<TrainConfig> make_grid(const TrainConfig& base) {
    std::vector<TrainConfig> grid;
    for (double C : {1.0, 10.0, 100.0}) {
        if (base.kernel == "linear") {
            TrainConfig c = base;
            c.C = C;
            grid.push_back(c);
            continue;
        }
        for (double gamma : {0.0, 0.01, 0.1}) { // 0 selects the scale rule
            TrainConfig c = base;
            c.C = C;
            c.gamma = gamma;
            grid.push_back(c);
        }
    }
    return grid;
}

} // namespace

TrainConfig grid_search_svc(const Matrix& X, const std::vector<int>& y, TrainConfig base,
                            std::size_t folds) {
    check_matrix(X, 2, "grid_search_svc");
    if (folds < 2) throw std::invalid_argument("grid_search_svc: need at least 2 folds");
    const auto fold_of = fold_assignment(X.size(), folds, base.seed, &y);

    TrainConfig best = base;
    double best_acc = -1.0;
    for (const auto& cfg : make_grid(base)) {
        std::size_t correct = 0, total = 0;
        for (std::size_t f = 0; f < folds; ++f) {
            Matrix Xtr, Xte;
            std::vector<int> ytr, yte;
            for (std::size_t i = 0; i < X.size(); ++i) {
                if (fold_of[i] == f) {
                    Xte.push_back(X[i]);
                    yte.push_back(y[i]);
                } else {
                    Xtr.push_back(X[i]);
                    ytr.push_back(y[i]);
                }
            }
            if (Xte.empty() || std::set<int>(ytr.begin(), ytr.end()).size() < 2) continue;
            const auto model = train_svc(Xtr, ytr, cfg);
            for (std::size_t i = 0; i < Xte.size(); ++i) {
                correct += predict_svc(model, Xte[i]).label == yte[i] ? 1 : 0;
                ++total;
            }
        }
        const double acc = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
        if (acc > best_acc) {
            best_acc = acc;
            best = cfg;
        }
    }
    return best;
}

TrainConfig grid_search_svr(const Matrix& X, const std::vector<double>& y, TrainConfig base,
                            std::size_t folds) {
    check_matrix(X, 2, "grid_search_svr");
    if (folds < 2) throw std::invalid_argument("grid_search_svr: need at least 2 folds");
    const auto fold_of = fold_assignment(X.size(), folds, base.seed, nullptr);

    TrainConfig best = base;
    double best_mae = std::numeric_limits<double>::infinity();
    for (const auto& cfg : make_grid(base)) {
        double abs_err = 0.0;
        std::size_t total = 0;
        for (std::size_t f = 0; f < folds; ++f) {
            Matrix Xtr, Xte;
            std::vector<double> ytr, yte;
            for (std::size_t i = 0; i < X.size(); ++i) {
                if (fold_of[i] == f) {
                    Xte.push_back(X[i]);
                    yte.push_back(y[i]);
                } else {
                    Xtr.push_back(X[i]);
                    ytr.push_back(y[i]);
                }
            }
            if (Xte.empty() || Xtr.size() < 2) continue;
            const auto model = train_svr(Xtr, ytr, cfg);
            for (std::size_t i = 0; i < Xte.size(); ++i) {
                abs_err += std::abs(predict_svr(model, Xte[i]) - yte[i]);
                ++total;
            }
        }
        const double mae =
            total ? abs_err / static_cast<double>(total) : std::numeric_limits<double>::infinity();
        if (mae < best_mae) {
            best_mae = mae;
            best = cfg;
        }
    }
    return best;
}

} // namespace bsense
