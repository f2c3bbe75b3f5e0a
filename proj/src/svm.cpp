#include "diag/svm.hpp"

#include "byte_io.hpp"
#include "diag/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace diag {

namespace {

constexpr double kTau = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_upper(double a, double C) { return a >= C; }
bool is_lower(double a) { return a <= 0.0; }

struct WorkingSet {
  Eigen::Index i = -1;
  Eigen::Index j = -1;
  double gap = 0.0;
};

// Second-order selection (Fan, Chen & Lin); i maximises -y G over I_up, j
// minimises the predicted objective decrease over I_low.
WorkingSet select_working_set(const RowMatrix& K, std::span<const double> y, const std::vector<double>& alpha,
                              const std::vector<double>& grad, double C) {
  const Eigen::Index n = K.rows();
  double gmax = -kInf;
  Eigen::Index i = -1;
  for (Eigen::Index t = 0; t < n; ++t) {
    if (y[t] > 0) {
      if (!is_upper(alpha[t], C) && -grad[t] >= gmax) {
        gmax = -grad[t];
        i = t;
      }
    } else if (!is_lower(alpha[t]) && grad[t] >= gmax) {
      gmax = grad[t];
      i = t;
    }
  }

  double gmax2 = -kInf;
  double best_drop = kInf;
  Eigen::Index j = -1;
  for (Eigen::Index t = 0; t < n; ++t) {
    if (y[t] > 0) {
      if (!is_lower(alpha[t])) {
        const double grad_diff = gmax + grad[t];
        gmax2 = std::max(gmax2, grad[t]);
        if (i >= 0 && grad_diff > 0) {
          const double quad = K(i, i) + K(t, t) - 2.0 * K(i, t);
          const double drop = -(grad_diff * grad_diff) / (quad > 0 ? quad : kTau);
          if (drop <= best_drop) {
            best_drop = drop;
            j = t;
          }
        }
      }
    } else if (!is_upper(alpha[t], C)) {
      const double grad_diff = gmax - grad[t];
      gmax2 = std::max(gmax2, -grad[t]);
      if (i >= 0 && grad_diff > 0) {
        const double quad = K(i, i) + K(t, t) - 2.0 * K(i, t);
        const double drop = -(grad_diff * grad_diff) / (quad > 0 ? quad : kTau);
        if (drop <= best_drop) {
          best_drop = drop;
          j = t;
        }
      }
    }
  }
  return WorkingSet{i, j, gmax + gmax2};
}

double compute_rho(std::span<const double> y, const std::vector<double>& alpha, const std::vector<double>& grad,
                   double C) {
  double ub = kInf, lb = -kInf, sum_free = 0.0;
  int n_free = 0;
  for (std::size_t t = 0; t < alpha.size(); ++t) {
    const double yg = y[t] * grad[t];
    if (is_upper(alpha[t], C)) {
      if (y[t] < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (is_lower(alpha[t])) {
      if (y[t] > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  return n_free > 0 ? sum_free / n_free : (ub + lb) / 2.0;
}

}  // namespace

BinarySolution solve_binary(const RowMatrix& K, std::span<const double> y, double C, const SolverOptions& options) {
  const Eigen::Index n = K.rows();
  if (K.cols() != n || static_cast<Eigen::Index>(y.size()) != n)
    throw ConfigError("solve_binary: kernel and label sizes disagree");
  if (!(C > 0.0)) throw ConfigError("solve_binary: C must be positive");
  if (!(options.tol > 0.0)) throw ConfigError("solve_binary: tol must be positive");

  std::vector<double> alpha(n, 0.0);
  std::vector<double> grad(n, -1.0);  // G = Q a - e
  BinarySolution sol;

  long iter = 0;
  for (;; ++iter) {
    const WorkingSet ws = select_working_set(K, y, alpha, grad, C);
    sol.kkt_gap = ws.gap;
    if (ws.j < 0 || ws.i < 0 || ws.gap < options.tol) break;
    if (iter >= options.max_iterations)
      throw ConvergenceError("svm solver hit the iteration cap (" + std::to_string(options.max_iterations) +
                             ") with KKT gap " + std::to_string(ws.gap));

    const Eigen::Index i = ws.i, j = ws.j;
    const double old_ai = alpha[i], old_aj = alpha[j];
    const double qij = y[i] * y[j] * K(i, j);
    if (y[i] != y[j]) {
      double quad = K(i, i) + K(j, j) + 2.0 * qij;
      if (quad <= 0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) { alpha[j] = 0; alpha[i] = diff; }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > C) { alpha[i] = C; alpha[j] = C - diff; }
      } else if (alpha[j] > C) {
        alpha[j] = C;
        alpha[i] = C + diff;
      }
    } else {
      double quad = K(i, i) + K(j, j) - 2.0 * qij;
      if (quad <= 0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) { alpha[i] = C; alpha[j] = sum - C; }
      } else if (alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = sum;
      }
      if (sum > C) {
        if (alpha[j] > C) { alpha[j] = C; alpha[i] = sum - C; }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = sum;
      }
    }

    const double dai = alpha[i] - old_ai, daj = alpha[j] - old_aj;
    for (Eigen::Index t = 0; t < n; ++t)
      grad[t] += y[t] * (y[i] * K(i, t) * dai + y[j] * K(j, t) * daj);
  }

  sol.iterations = iter;
  sol.rho = compute_rho(y, alpha, grad, C);
  double obj = 0.0;
  for (Eigen::Index t = 0; t < n; ++t) obj += alpha[t] * (grad[t] - 1.0);
  sol.dual_objective = -0.5 * obj;
  sol.alpha = std::move(alpha);
  return sol;
}

double kkt_gap(const RowMatrix& K, std::span<const double> y, std::span<const double> alpha, double C) {
  const Eigen::Index n = K.rows();
  std::vector<double> a(alpha.begin(), alpha.end());
  std::vector<double> grad(n, -1.0);
  for (Eigen::Index t = 0; t < n; ++t)
    for (Eigen::Index s = 0; s < n; ++s) grad[t] += y[t] * y[s] * K(t, s) * a[s];
  double m_up = -kInf, m_low = kInf;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double v = -y[t] * grad[t];
    const bool up = (y[t] > 0 && a[t] < C) || (y[t] < 0 && a[t] > 0);
    const bool low = (y[t] > 0 && a[t] > 0) || (y[t] < 0 && a[t] < C);
    if (up) m_up = std::max(m_up, v);
    if (low) m_low = std::min(m_low, v);
  }
  if (m_up == -kInf || m_low == kInf) return 0.0;
  return m_up - m_low;
}

double dual_objective(const RowMatrix& K, std::span<const double> y, std::span<const double> alpha) {
  double linear = 0.0, quad = 0.0;
  const Eigen::Index n = K.rows();
  for (Eigen::Index t = 0; t < n; ++t) {
    linear += alpha[t];
    for (Eigen::Index s = 0; s < n; ++s) quad += alpha[t] * alpha[s] * y[t] * y[s] * K(t, s);
  }
  return linear - 0.5 * quad;
}

std::uint64_t fingerprint(const RowMatrix& kernel) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffu;
      h *= 0x100000001b3ull;
    }
  };
  mix(static_cast<std::uint64_t>(kernel.rows()));
  mix(static_cast<std::uint64_t>(kernel.cols()));
  for (Eigen::Index i = 0; i < kernel.size(); ++i) mix(std::bit_cast<std::uint64_t>(kernel.data()[i]));
  return h;
}

TrainedSVM svm_train(const RowMatrix& kernel, std::span<const int> labels, double C, const SolverOptions& options) {
  const Eigen::Index n = kernel.rows();
  if (kernel.cols() != n) throw PreconditionError("svm_train: kernel is not square");
  if (static_cast<Eigen::Index>(labels.size()) != n) throw ConfigError("svm_train: label count does not match kernel");
  if (n < 2) throw DegenerateInputError("svm_train: need at least 2 training samples");
  if (!(C > 0.0)) throw ConfigError("svm_train: C must be positive");
  const double scale = std::max(1.0, kernel.cwiseAbs().maxCoeff());
  const double asym = (kernel - kernel.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-8 * scale)
    throw PreconditionError("svm_train: kernel is not symmetric (max asymmetry " + std::to_string(asym) + ")");

  std::set<int> class_set(labels.begin(), labels.end());
  if (class_set.size() < 2) throw DegenerateInputError("svm_train: need at least 2 classes");

  TrainedSVM model;
  model.classes.assign(class_set.begin(), class_set.end());
  model.C = C;
  model.tol = options.tol;
  model.n_train = static_cast<std::size_t>(n);
  model.kernel_fingerprint = fingerprint(kernel);

  std::vector<std::pair<int, int>> pairs;
  for (std::size_t a = 0; a < model.classes.size(); ++a)
    for (std::size_t b = a + 1; b < model.classes.size(); ++b) pairs.emplace_back(model.classes[a], model.classes[b]);
  model.problems.resize(pairs.size());

  std::vector<std::string> failures(pairs.size());
  std::vector<std::string> failure_kinds(pairs.size());
  const auto n_pairs = static_cast<std::ptrdiff_t>(pairs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t p = 0; p < n_pairs; ++p) {
    const auto [pos, neg] = pairs[p];
    std::vector<Eigen::Index> idx;
    std::vector<double> y;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (labels[t] == pos || labels[t] == neg) {
        idx.push_back(t);
        y.push_back(labels[t] == pos ? 1.0 : -1.0);
      }
    }
    RowMatrix sub(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t a = 0; a < idx.size(); ++a)
      for (std::size_t b = 0; b < idx.size(); ++b) sub(a, b) = kernel(idx[a], idx[b]);
    try {
      const BinarySolution sol = solve_binary(sub, y, C, options);
      BinaryModel& bm = model.problems[p];
      bm.positive_class = pos;
      bm.negative_class = neg;
      bm.coef.assign(n, 0.0);
      bm.alpha.assign(n, 0.0);
      for (std::size_t a = 0; a < idx.size(); ++a) {
        bm.alpha[idx[a]] = sol.alpha[a];
        bm.coef[idx[a]] = y[a] * sol.alpha[a];
      }
      bm.bias = -sol.rho;
      bm.dual_objective = sol.dual_objective;
      bm.kkt_gap = sol.kkt_gap;
      bm.iterations = sol.iterations;
    } catch (const Error& e) {
      failure_kinds[p] = e.kind();
      failures[p] = "classes (" + std::to_string(pos) + ", " + std::to_string(neg) + "): " + e.what();
    }
  }
  for (std::size_t p = 0; p < failures.size(); ++p)
    if (!failures[p].empty()) throw_error(failure_kinds[p], "svm_train: " + failures[p]);
  return model;
}

RowMatrix svm_decision_values(const TrainedSVM& model, const RowMatrix& cross) {
  if (static_cast<std::size_t>(cross.rows()) != model.n_train)
    throw ConfigError("svm_predict: cross kernel has " + std::to_string(cross.rows()) + " rows, model was trained on " +
                      std::to_string(model.n_train));
  RowMatrix dec(static_cast<Eigen::Index>(model.problems.size()), cross.cols());
  for (std::size_t p = 0; p < model.problems.size(); ++p) {
    const auto& bm = model.problems[p];
    const Eigen::Map<const Vector> coef(bm.coef.data(), static_cast<Eigen::Index>(bm.coef.size()));
    for (Eigen::Index t = 0; t < cross.cols(); ++t) {
      double acc = bm.bias;
      for (Eigen::Index i = 0; i < cross.rows(); ++i)
        if (coef[i] != 0.0) acc += coef[i] * cross(i, t);
      dec(static_cast<Eigen::Index>(p), t) = acc;
    }
  }
  return dec;
}

std::vector<int> svm_predict(const TrainedSVM& model, const RowMatrix& cross) {
  const RowMatrix dec = svm_decision_values(model, cross);
  std::vector<int> out(static_cast<std::size_t>(cross.cols()));
  std::map<int, std::size_t> slot;
  for (std::size_t c = 0; c < model.classes.size(); ++c) slot[model.classes[c]] = c;
  for (Eigen::Index t = 0; t < cross.cols(); ++t) {
    std::vector<int> votes(model.classes.size(), 0);
    std::vector<double> strength(model.classes.size(), 0.0);
    for (std::size_t p = 0; p < model.problems.size(); ++p) {
      const double v = dec(static_cast<Eigen::Index>(p), t);
      const int winner = v > 0 ? model.problems[p].positive_class : model.problems[p].negative_class;
      ++votes[slot[winner]];
      strength[slot[winner]] += std::abs(v);
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < votes.size(); ++c) {
      if (votes[c] > votes[best] || (votes[c] == votes[best] && strength[c] > strength[best])) best = c;
    }
    out[static_cast<std::size_t>(t)] = model.classes[best];
  }
  return out;
}

std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed) {
  if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  for (const auto& [cls, members] : by_class) {
    if (static_cast<int>(members.size()) < folds)
      throw ConfigError("cross-validation: class " + std::to_string(cls) + " has " + std::to_string(members.size()) +
                        " samples, fewer than " + std::to_string(folds) + " folds");
  }
  std::mt19937_64 rng(seed);
  std::vector<int> fold(labels.size(), 0);
  std::size_t cursor = 0;
  for (auto& [cls, members] : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t i : members) fold[i] = static_cast<int>(cursor++ % static_cast<std::size_t>(folds));
  }
  return fold;
}

CVResult cross_validate_c(const RowMatrix& kernel, std::span<const int> labels, const CVConfig& config) {
  if (config.c_grid.empty()) throw ConfigError("cross-validation: empty C grid");
  for (double c : config.c_grid)
    if (!(c > 0.0)) throw ConfigError("cross-validation: C values must be positive");
  if (kernel.rows() != static_cast<Eigen::Index>(labels.size()))
    throw ConfigError("cross-validation: label count does not match kernel");

  CVResult result;
  result.c_values = config.c_grid;
  std::sort(result.c_values.begin(), result.c_values.end());
  result.c_values.erase(std::unique(result.c_values.begin(), result.c_values.end()), result.c_values.end());

  const std::vector<int> fold = stratified_folds(labels, config.folds, config.rng_seed);
  const std::size_t n_c = result.c_values.size();
  const auto k = static_cast<std::size_t>(config.folds);
  std::vector<double> fold_acc(n_c * k, 0.0);
  std::vector<std::string> failures(n_c * k);
  std::vector<std::string> failure_kinds(n_c * k);

  const auto jobs = static_cast<std::ptrdiff_t>(n_c * k);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t job = 0; job < jobs; ++job) {
    const std::size_t ci = static_cast<std::size_t>(job) / k;
    const int f = static_cast<int>(static_cast<std::size_t>(job) % k);
    std::vector<Eigen::Index> train, test;
    for (std::size_t i = 0; i < labels.size(); ++i) (fold[i] == f ? test : train).push_back(static_cast<Eigen::Index>(i));
    RowMatrix k_train(static_cast<Eigen::Index>(train.size()), static_cast<Eigen::Index>(train.size()));
    RowMatrix k_cross(static_cast<Eigen::Index>(train.size()), static_cast<Eigen::Index>(test.size()));
    std::vector<int> y_train(train.size());
    for (std::size_t a = 0; a < train.size(); ++a) {
      y_train[a] = labels[train[a]];
      for (std::size_t b = 0; b < train.size(); ++b) k_train(a, b) = kernel(train[a], train[b]);
      for (std::size_t b = 0; b < test.size(); ++b) k_cross(a, b) = kernel(train[a], test[b]);
    }
    try {
      const TrainedSVM model = svm_train(k_train, y_train, result.c_values[ci], config.solver);
      const std::vector<int> pred = svm_predict(model, k_cross);
      std::size_t correct = 0;
      for (std::size_t b = 0; b < test.size(); ++b) correct += pred[b] == labels[test[b]];
      fold_acc[static_cast<std::size_t>(job)] = static_cast<double>(correct) / static_cast<double>(test.size());
    } catch (const Error& e) {
      failure_kinds[static_cast<std::size_t>(job)] = e.kind();
      failures[static_cast<std::size_t>(job)] = e.what();
    }
  }
  for (std::size_t j = 0; j < failures.size(); ++j)
    if (!failures[j].empty()) throw_error(failure_kinds[j], "cross-validation: " + failures[j]);

  result.accuracies.assign(n_c, 0.0);
  for (std::size_t ci = 0; ci < n_c; ++ci) {
    double sum = 0.0;
    for (std::size_t f = 0; f < k; ++f) sum += fold_acc[ci * k + f];
    result.accuracies[ci] = sum / static_cast<double>(k);
  }
  std::size_t best = 0;
  for (std::size_t ci = 1; ci < n_c; ++ci)
    if (result.accuracies[ci] > result.accuracies[best] + 1e-12) best = ci;
  result.best_c = result.c_values[best];
  result.best_accuracy = result.accuracies[best];
  return result;
}

void save_model(const std::filesystem::path& path, const TrainedSVM& model) {
  nlohmann::json header;
  header["format"] = "diag-svm-v1";
  header["C"] = model.C;
  header["tol"] = model.tol;
  header["n_train"] = model.n_train;
  header["classes"] = model.classes;
  std::ostringstream fp;
  fp << std::hex << model.kernel_fingerprint;
  header["kernel_fingerprint"] = fp.str();
  header["pairs"] = nlohmann::json::array();
  for (const auto& bm : model.problems) {
    header["pairs"].push_back({{"positive", bm.positive_class},
                               {"negative", bm.negative_class},
                               {"bias", bm.bias},
                               {"iterations", bm.iterations}});
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << header.dump() << '\n';
  for (const auto& bm : model.problems)
    for (double c : bm.coef) detail::put_f64(out, c);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

TrainedSVM load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  std::getline(in, line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("'" + path.string() + "': bad model header: " + e.what());
  }
  if (header.value("format", "") != "diag-svm-v1") throw ParseError("'" + path.string() + "': unknown model format");
  TrainedSVM model;
  model.C = header.at("C").get<double>();
  model.tol = header.at("tol").get<double>();
  model.n_train = header.at("n_train").get<std::size_t>();
  model.classes = header.at("classes").get<std::vector<int>>();
  model.kernel_fingerprint = std::stoull(header.at("kernel_fingerprint").get<std::string>(), nullptr, 16);

  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string payload = std::move(ss).str();
  const auto& pairs = header.at("pairs");
  if (payload.size() != 8 * model.n_train * pairs.size())
    throw ParseError("'" + path.string() + "': payload size does not match header");
  const char* p = payload.data();
  for (const auto& pj : pairs) {
    BinaryModel bm;
    bm.positive_class = pj.at("positive").get<int>();
    bm.negative_class = pj.at("negative").get<int>();
    bm.bias = pj.at("bias").get<double>();
    bm.iterations = pj.at("iterations").get<long>();
    bm.coef.resize(model.n_train);
    bm.alpha.resize(model.n_train);
    for (std::size_t i = 0; i < model.n_train; ++i, p += 8) {
      bm.coef[i] = detail::get_f64(p);
      bm.alpha[i] = std::abs(bm.coef[i]);
    }
    model.problems.push_back(std::move(bm));
  }
  return model;
}

}  // namespace diag
