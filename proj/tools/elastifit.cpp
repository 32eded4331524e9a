// elastifit: command-line front end.
//
//   synth     generate a synthetic instance
//   fit       fit a model (gradient ascent, alternating maximization or full rank)
//   cv-sweep  cross-validated grid over (r, lambda)
//   price     optimal price changes under a fitted model
//   eval-ll   average log-likelihood of a model on data

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "elastifit/core.hpp"
#include "elastifit/error.hpp"
#include "elastifit/eval.hpp"
#include "elastifit/fit.hpp"
#include "elastifit/io.hpp"
#include "elastifit/parallel.hpp"
#include "elastifit/synth.hpp"

namespace fs = std::filesystem;
using namespace elastifit;

namespace {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kData = 3,
  kConvergence = 4,
  kIo = 5,
};

struct UsageError : Error {
  using Error::Error;
};

struct DataOptions {
  std::string demands, prices, nominal_prices;
  bool header = false;
};

struct SolverOptions {
  std::uint64_t seed = 0;
  double eps_rel = 1e-3, eps_abs = 1e-3;
  long max_iters = 100000;

  FitConfig config() const {
    FitConfig c;
    c.seed = seed;
    c.eps_rel = eps_rel;
    c.eps_abs = eps_abs;
    c.max_iters = max_iters;
    return c;
  }
};

void add_data_flags(CLI::App* cmd, DataOptions& d) {
  cmd->add_option("--demands", d.demands, "Demand counts CSV (products x periods)")->required();
  cmd->add_option("--prices", d.prices, "Prices CSV (products x periods)")->required();
  cmd->add_option("--nominal-prices", d.nominal_prices,
                  "Nominal prices, one per product (default: geometric mean of prices)");
  cmd->add_flag("--header", d.header, "Input CSV files start with a header line");
}

void add_solver_flags(CLI::App* cmd, SolverOptions& s) {
  cmd->add_option("--seed", s.seed, "Seed for all randomness");
  cmd->add_option("--eps-rel", s.eps_rel, "Relative gradient tolerance");
  cmd->add_option("--eps-abs", s.eps_abs, "Absolute gradient tolerance");
  cmd->add_option("--max-iters", s.max_iters, "Cap on accepted ascent steps");
}

struct LoadedData {
  Dataset dataset;
  Vector p_nom;
};

Vector nominal_prices(const std::string& nominal_path, const std::string& prices_path,
                      bool header) {
  const io::CsvOptions csv{header};
  if (!nominal_path.empty()) return io::read_vector(nominal_path, csv);
  if (prices_path.empty()) throw UsageError("either --nominal-prices or --prices is required");
  return geometric_mean_prices(io::read_csv(prices_path, csv));
}

LoadedData load_data(const DataOptions& d) {
  const io::CsvOptions csv{d.header};
  Matrix demands = io::read_demands(d.demands, csv);
  Matrix prices = io::read_csv(d.prices, csv);
  if (prices.rows() != demands.rows() || prices.cols() != demands.cols()) {
    throw DataError("prices are " + std::to_string(prices.rows()) + "x" +
                    std::to_string(prices.cols()) + " but demands are " +
                    std::to_string(demands.rows()) + "x" + std::to_string(demands.cols()));
  }
  Vector p_nom = d.nominal_prices.empty() ? geometric_mean_prices(prices)
                                          : io::read_vector(d.nominal_prices, csv);
  if (p_nom.size() != demands.rows()) {
    throw DataError("nominal prices have " + std::to_string(p_nom.size()) + " entries, expected " +
                    std::to_string(demands.rows()));
  }
  Matrix design = assemble_design(prices, p_nom);
  return LoadedData{Dataset(std::move(demands), std::move(design)), std::move(p_nom)};
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

nlohmann::json to_json_array(const std::vector<double>& v) { return nlohmann::json(v); }

// synth

struct SynthOptions {
  int n = 0, N = 0, r_syn = 0;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  bool stddev = false;
};

int cmd_synth(const SynthOptions& o) {
  if (o.n < 1 || o.N < 1 || o.r_syn < 1) throw UsageError("--n, --N and --r-syn must be >= 1");
  SyntheticOptions so;
  so.scale = o.stddev ? GaussianScale::StdDev : GaussianScale::Variance;
  const auto inst = generate_synthetic(o.n, o.N, o.r_syn, o.seed, so);
  ensure_dir(o.out_dir);
  io::write_csv(join(o.out_dir, "demands.csv"), inst.dataset.demands(), true);
  io::write_csv(join(o.out_dir, "prices.csv"), inst.prices);
  io::write_vector(join(o.out_dir, "nominal_prices.csv"), inst.p_nom);
  io::write_vector(join(o.out_dir, "costs.csv"), inst.cost);
  io::ModelFile truth{inst.truth(), 0.0, {}};
  truth.metadata.method = "synthetic";
  truth.metadata.seed = o.seed;
  truth.metadata.objective_kind = "none";
  io::save_model(join(o.out_dir, "truth.json"), truth);
  std::cout << "wrote demands.csv (" << o.n << "x" << o.N << "), prices.csv (" << o.n << "x"
            << o.N << "), nominal_prices.csv (" << o.n << "), costs.csv (" << o.n
            << "), truth.json (r=" << o.r_syn << ") to " << o.out_dir << "\n";
  return kOk;
}

// fit

struct FitOptions {
  DataOptions data;
  SolverOptions solver;
  std::string method = "ga";
  int r = 0;
  double lambda = 0.1;
  int outer_iters = 100;
  std::string out_dir = ".";
};

int cmd_fit(const FitOptions& o) {
  const LoadedData d = load_data(o.data);
  const FitConfig cfg = o.solver.config();
  const auto t0 = std::chrono::steady_clock::now();

  io::ModelFile mf;
  mf.lambda = o.lambda;
  mf.metadata.method = o.method;
  mf.metadata.seed = o.solver.seed;
  mf.metadata.eps_rel = cfg.eps_rel;
  mf.metadata.eps_abs = cfg.eps_abs;
  nlohmann::json report;
  Termination term;

  if (o.method == "full") {
    const auto rep = fit_full_rank_report(d.dataset, cfg);
    const Index n = d.dataset.products();
    mf.model = ElasticityModel{rep.E_tilde.leftCols(n), Matrix::Identity(n, n), Vector::Zero(n),
                               rep.E_tilde.col(n)};
    mf.metadata.iterations = rep.iterations;
    mf.metadata.objective = rep.objective;
    mf.metadata.objective_kind = "data_fit";
    term = rep.termination;
    report["objective_trace"] = to_json_array(rep.objective_trace);
    report["step_trace"] = to_json_array(rep.step_trace);
  } else {
    if (o.r < 1) throw UsageError("--r must be >= 1 for low-rank methods");
    const Hyperparams hyper{o.r, o.lambda};
    hyper.validate();
    FitReport rep;
    if (o.method == "ga")
      rep = fit_gradient_ascent(d.dataset, hyper, cfg);
    else if (o.method == "am")
      rep = fit_alternating(d.dataset, hyper, cfg, o.outer_iters);
    else
      throw UsageError("unknown --method '" + o.method + "'");
    mf.model = rep.model;
    mf.metadata.iterations = rep.iterations;
    mf.metadata.objective = rep.objective;
    term = rep.termination;
    report["objective_trace"] = to_json_array(rep.objective_trace);
    report["step_trace"] = to_json_array(rep.step_trace);
    report["gradient_norm"] = rep.gradient_norm;
    if (o.method == "am") {
      report["outer_iterations"] = rep.outer_iterations;
      report["half_step_objectives"] = to_json_array(rep.half_step_objectives);
    }
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  mf.metadata.termination = to_string(term);

  report["method"] = o.method;
  report["objective"] = mf.metadata.objective;
  report["objective_kind"] = mf.metadata.objective_kind;
  report["iterations"] = mf.metadata.iterations;
  report["termination"] = mf.metadata.termination;
  report["seconds"] = seconds;

  ensure_dir(o.out_dir);
  io::save_model(join(o.out_dir, "model.json"), mf);
  io::write_text(join(o.out_dir, "report.json"), report.dump(2) + "\n");
  std::cout << "objective " << io::format_real(mf.metadata.objective) << "\n"
            << "iterations " << mf.metadata.iterations << "\n"
            << "termination " << mf.metadata.termination << "\n"
            << "seconds " << seconds << "\n";
  if (term == Termination::StalledLineSearch || term == Termination::MaxIters) {
    std::cerr << "warning: fit did not converge (" << to_string(term) << ")\n";
    return kConvergence;
  }
  return kOk;
}

// cv-sweep

struct PricingFlags {
  std::string costs;
  double pi_min = std::log(0.8);
  double pi_max = std::log(1.2);
  int starts = 8;
};

void add_pricing_flags(CLI::App* cmd, PricingFlags& p) {
  cmd->add_option("--costs", p.costs, "Unit costs, one per product");
  cmd->add_option("--pi-min", p.pi_min, "Lower bound on log price changes (default log 0.8)");
  cmd->add_option("--pi-max", p.pi_max, "Upper bound on log price changes (default log 1.2)");
  cmd->add_option("--starts", p.starts, "Random starts for the pricing solver");
}

struct SweepOptions {
  DataOptions data;
  SolverOptions solver;
  PricingFlags pricing;
  std::vector<int> r_grid;
  std::vector<double> lambda_grid;
  int K = 5;
  std::string truth;
  std::string out_dir = ".";
};

struct Cell {
  int r;
  double lambda;
  double ll = 0.0;
  std::optional<double> profit;
};

// Index of the best cell; ties go to smaller r, then larger lambda.
template <typename Score>
std::size_t best_cell(const std::vector<Cell>& cells, Score score) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < cells.size(); ++i) {
    const double a = score(cells[i]), b = score(cells[best]);
    if (a > b || (a == b && (cells[i].r < cells[best].r ||
                             (cells[i].r == cells[best].r && cells[i].lambda > cells[best].lambda))))
      best = i;
  }
  return best;
}

int cmd_cv_sweep(const SweepOptions& o) {
  if (o.r_grid.empty() || o.lambda_grid.empty()) throw UsageError("grids must be nonempty");
  if (o.K < 2) throw UsageError("--K must be >= 2");
  for (int r : o.r_grid)
    if (r < 1) throw UsageError("--r-grid entries must be >= 1");
  for (double l : o.lambda_grid)
    if (!(l > 0.0)) throw UsageError("--lambda-grid entries must be > 0");

  const LoadedData d = load_data(o.data);
  const bool price = !o.truth.empty();
  std::optional<PricingSpec> spec;
  std::optional<PricingTruth> truth;
  if (price) {
    if (o.pricing.costs.empty()) throw UsageError("--truth requires --costs");
    const auto tm = io::load_model(o.truth);
    if (tm.model.products() != d.dataset.products()) {
      throw DataError("truth model has " + std::to_string(tm.model.products()) +
                      " products, data has " + std::to_string(d.dataset.products()));
    }
    truth = PricingTruth{tm.model.elasticity(), tm.model.nominal_demand()};
    spec = PricingSpec::with_uniform_bounds(d.p_nom, io::read_vector(o.pricing.costs, {o.data.header}),
                                            o.pricing.pi_min, o.pricing.pi_max);
    spec->validate();
  }

  std::vector<Cell> cells;
  for (int r : o.r_grid)
    for (double l : o.lambda_grid) cells.push_back(Cell{r, l, 0.0, std::nullopt});

  const FitConfig cfg = o.solver.config();
  CvOptions cv;
  cv.K = o.K;
  cv.threads = 1;
  cv.pricing.starts = o.pricing.starts;
  parallel_for(cells.size(), thread_limit_from_env(), [&](std::size_t i) {
    try {
      const auto res = cross_validate(d.dataset, Hyperparams{cells[i].r, cells[i].lambda}, cfg, cv,
                                      price ? &*spec : nullptr, price ? &*truth : nullptr);
      cells[i].ll = res.log_likelihood;
      cells[i].profit = res.profit;
    } catch (...) {
      rethrow_with_context("cell r=" + std::to_string(cells[i].r) + ", lambda=" +
                           io::format_real(cells[i].lambda) + ": ");
    }
  });

  const std::size_t best_ll = best_cell(cells, [](const Cell& c) { return c.ll; });
  const std::size_t best_profit =
      price ? best_cell(cells, [](const Cell& c) { return *c.profit; }) : 0;

  std::string csv = price ? "r,lambda,cv_log_likelihood,cv_profit,best_log_likelihood,best_profit\n"
                          : "r,lambda,cv_log_likelihood,best_log_likelihood\n";
  for (std::size_t i = 0; i < cells.size(); ++i) {
    csv += std::to_string(cells[i].r) + "," + io::format_real(cells[i].lambda) + "," +
           io::format_real(cells[i].ll);
    if (price) csv += "," + io::format_real(*cells[i].profit);
    csv += i == best_ll ? ",1" : ",0";
    if (price) csv += i == best_profit ? ",1" : ",0";
    csv += "\n";
  }
  ensure_dir(o.out_dir);
  io::write_text(join(o.out_dir, "sweep.csv"), csv);
  std::cout << csv;
  std::cout << "best log-likelihood: r=" << cells[best_ll].r
            << " lambda=" << io::format_real(cells[best_ll].lambda) << "\n";
  if (price) {
    std::cout << "best profit: r=" << cells[best_profit].r
              << " lambda=" << io::format_real(cells[best_profit].lambda) << "\n";
  }
  return kOk;
}

// price

struct PriceOptions {
  std::string model;
  std::string nominal_prices, prices;
  bool header = false;
  PricingFlags pricing;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
};

int cmd_price(const PriceOptions& o) {
  if (o.pricing.costs.empty()) throw UsageError("--costs is required");
  const auto mf = io::load_model(o.model);
  const Vector p_nom = nominal_prices(o.nominal_prices, o.prices, o.header);
  const Vector cost = io::read_vector(o.pricing.costs, {o.header});
  const Index n = mf.model.products();
  if (p_nom.size() != n || cost.size() != n) {
    throw DataError("nominal prices and costs need " + std::to_string(n) + " entries");
  }
  if (o.pricing.pi_min > o.pricing.pi_max) throw UsageError("--pi-min exceeds --pi-max");
  const auto spec = PricingSpec::with_uniform_bounds(p_nom, cost, o.pricing.pi_min, o.pricing.pi_max);
  PricingOptions po;
  po.starts = o.pricing.starts;
  po.seed = o.seed;
  const auto sol = solve_pricing(mf.model.elasticity(), mf.model.nominal_demand(), spec, po);

  std::string csv = "product,pi,nominal_price,price\n";
  for (Index i = 0; i < n; ++i) {
    csv += std::to_string(i) + "," + io::format_real(sol.pi(i)) + "," + io::format_real(p_nom(i)) +
           "," + io::format_real(p_nom(i) * std::exp(sol.pi(i))) + "\n";
  }
  ensure_dir(o.out_dir);
  io::write_text(join(o.out_dir, "prices_out.csv"), csv);
  nlohmann::json summary{{"profit", sol.profit},
                         {"profit_at_nominal",
                          pricing_profit(mf.model.elasticity(), mf.model.nominal_demand(), spec,
                                         Vector::Zero(n))},
                         {"pi_min", o.pricing.pi_min},
                         {"pi_max", o.pricing.pi_max},
                         {"starts", o.pricing.starts},
                         {"seed", o.seed}};
  io::write_text(join(o.out_dir, "pricing.json"), summary.dump(2) + "\n");
  std::cout << "profit " << io::format_real(sol.profit) << "\n";
  return kOk;
}

// eval-ll

struct EvalOptions {
  DataOptions data;
  std::string model;
};

int cmd_eval_ll(const EvalOptions& o) {
  const LoadedData d = load_data(o.data);
  const auto mf = io::load_model(o.model);
  if (mf.model.products() != d.dataset.products()) {
    throw DataError("model has " + std::to_string(mf.model.products()) + " products, data has " +
                    std::to_string(d.dataset.products()));
  }
  const Matrix Et = effective_elasticity(mf.model);
  std::cout << "average_log_likelihood " << io::format_real(average_log_likelihood(Et, d.dataset))
            << "\n";
  if (mf.metadata.objective_kind == "regularized" && mf.lambda > 0.0) {
    std::cout << "objective "
              << io::format_real(objective(mf.model, d.dataset, Hyperparams{mf.model.rank(), mf.lambda}))
              << "\n";
  } else {
    std::cout << "data_fit " << io::format_real(data_fit(Et, d.dataset)) << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-rank plus diagonal price elasticity estimation"};
  app.require_subcommand(1);

  SynthOptions synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic instance");
  c_synth->add_option("--n", synth.n, "Number of products")->required();
  c_synth->add_option("--N", synth.N, "Number of observations")->required();
  c_synth->add_option("--r-syn", synth.r_syn, "Rank of the true low-rank part")->required();
  c_synth->add_option("--seed", synth.seed, "Seed");
  c_synth->add_option("--out-dir", synth.out_dir, "Output directory");
  c_synth->add_flag("--factor-stddev", synth.stddev,
                    "Read the factor scale 0.1 as a standard deviation instead of a variance");

  FitOptions fit;
  auto* c_fit = app.add_subcommand("fit", "Fit an elasticity model");
  add_data_flags(c_fit, fit.data);
  add_solver_flags(c_fit, fit.solver);
  c_fit->add_option("--method", fit.method, "ga | am | full")
      ->check(CLI::IsMember({"ga", "am", "full"}));
  c_fit->add_option("--r", fit.r, "Rank bound");
  c_fit->add_option("--lambda", fit.lambda, "Regularization strength");
  c_fit->add_option("--outer-iters", fit.outer_iters, "Outer iterations for --method am");
  c_fit->add_option("--out-dir", fit.out_dir, "Output directory");

  SweepOptions sweep;
  auto* c_sweep = app.add_subcommand("cv-sweep", "Cross-validated sweep over r and lambda");
  add_data_flags(c_sweep, sweep.data);
  add_solver_flags(c_sweep, sweep.solver);
  add_pricing_flags(c_sweep, sweep.pricing);
  c_sweep->add_option("--r-grid", sweep.r_grid, "Comma-separated ranks")->delimiter(',')->required();
  c_sweep->add_option("--lambda-grid", sweep.lambda_grid, "Comma-separated lambdas")
      ->delimiter(',')
      ->required();
  c_sweep->add_option("--K", sweep.K, "Fold count");
  c_sweep->add_option("--truth", sweep.truth, "Truth model file; enables CV profit");
  c_sweep->add_option("--out-dir", sweep.out_dir, "Output directory");

  PriceOptions price;
  auto* c_price = app.add_subcommand("price", "Optimal prices under a fitted model");
  c_price->add_option("--model", price.model, "Model file")->required();
  c_price->add_option("--nominal-prices", price.nominal_prices, "Nominal prices");
  c_price->add_option("--prices", price.prices, "Price history (nominal = geometric mean)");
  c_price->add_flag("--header", price.header, "Input CSV files start with a header line");
  c_price->add_option("--seed", price.seed, "Seed");
  c_price->add_option("--out-dir", price.out_dir, "Output directory");
  add_pricing_flags(c_price, price.pricing);

  EvalOptions ev;
  auto* c_eval = app.add_subcommand("eval-ll", "Average log-likelihood of a model");
  add_data_flags(c_eval, ev.data);
  c_eval->add_option("--model", ev.model, "Model file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*c_synth) return cmd_synth(synth);
    if (*c_fit) return cmd_fit(fit);
    if (*c_sweep) return cmd_cv_sweep(sweep);
    if (*c_price) return cmd_price(price);
    if (*c_eval) return cmd_eval_ll(ev);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const UnboundedError& e) {
    std::cerr << "convergence failure: " << e.what() << "\n";
    return kConvergence;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const Error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInternal;
  }
  return kInternal;
}
