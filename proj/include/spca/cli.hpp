#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spca/amp.hpp"
#include "spca/instance.hpp"
#include "spca/phase.hpp"
#include "spca/prior.hpp"
#include "spca/state_evolution.hpp"

namespace spca {

namespace detail {

// %.17g: exact double round-trip, trailing zeros trimmed
inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline double parse_double(const std::string& s, const char* what) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw domain_error(std::string(what) + ": cannot parse number '" + s + "'");
  }
  if (pos != s.size()) throw domain_error(std::string(what) + ": trailing junk in '" + s + "'");
  return v;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// "lo:hi:count[:log]" or a comma-separated list of values
inline std::vector<double> parse_grid(const std::string& s, const char* what) {
  if (s.find(':') != std::string::npos) {
    const std::vector<std::string> parts = split(s, ':');
    if (parts.size() < 3 || parts.size() > 4)
      throw domain_error(std::string(what) + ": expected lo:hi:count[:log]");
    const double lo = parse_double(parts[0], what);
    const double hi = parse_double(parts[1], what);
    const long count = std::lround(parse_double(parts[2], what));
    bool log_spaced = false;
    if (parts.size() == 4) {
      if (parts[3] == "log")
        log_spaced = true;
      else if (parts[3] != "lin")
        throw domain_error(std::string(what) + ": spacing must be 'log' or 'lin'");
    }
    if (count < 1 || count > 100000) throw domain_error(std::string(what) + ": bad grid count");
    if (count == 1) return {lo};
    if (!(lo < hi)) throw domain_error(std::string(what) + ": need lo < hi");
    if (log_spaced && !(lo > 0.0))
      throw domain_error(std::string(what) + ": log spacing needs lo > 0");
    std::vector<double> g(static_cast<std::size_t>(count));
    for (long i = 0; i < count; ++i) {
      const double t = static_cast<double>(i) / (count - 1);
      g[static_cast<std::size_t>(i)] =
          log_spaced ? lo * std::pow(hi / lo, t) : lo + (hi - lo) * t;
    }
    return g;
  }
  std::vector<double> g;
  for (const std::string& tok : split(s, ',')) g.push_back(parse_double(tok, what));
  if (g.empty()) throw domain_error(std::string(what) + ": empty grid");
  return g;
}

inline std::pair<double, double> parse_bracket(const std::string& s, const char* what) {
  const std::vector<std::string> parts = split(s, ':');
  if (parts.size() != 2) throw domain_error(std::string(what) + ": expected lo:hi");
  return {parse_double(parts[0], what), parse_double(parts[1], what)};
}

inline unsigned resolve_threads(int flag_value) {
  if (flag_value > 0) return static_cast<unsigned>(flag_value);
  if (const char* env = std::getenv("SPCA_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

// sink that is either stdout or a file, chosen once
struct output_sink {
  std::ofstream file;
  std::ostream* os = &std::cout;
  explicit output_sink(const std::string& path, bool append = false) {
    if (!path.empty()) {
      file.open(path, append ? std::ios::app : std::ios::trunc);
      if (!file) throw io_error("cannot open output file '" + path + "'");
      os = &file;
    }
  }
  std::ostream& stream() { return *os; }
};

}  // namespace detail

namespace cli_impl {

using nlohmann::ordered_json;

struct common_opts {
  std::string family = "gb";
  double rho = 0.1;
  int rank = 1;
  std::string output;
  std::string format = "json";
};

inline void check_format(const std::string& f) {
  if (f != "json" && f != "csv") throw domain_error("--format must be json or csv");
}

inline std::vector<std::string> init_list(const std::string& init) {
  if (init == "both") return {"uninformative", "informative"};
  if (init == "uninformative" || init == "informative") return {init};
  throw domain_error("--init must be uninformative, informative, or both");
}

// ---- amp ------------------------------------------------------------------

struct amp_opts {
  common_opts com;
  long n = 2000;
  double delta = 0.0;
  std::uint64_t seed = 1;
  std::string init = "both";
  double tol = 1e-8;
  int max_iter = 2000;
  double damping = 0.0;
  std::string dump_path;
  std::string load_path;
};

inline int run_amp(const amp_opts& o) {
  check_format(o.com.format);
  const std::vector<std::string> inits = init_list(o.init);

  instance ins;
  prior_spec prior{parse_family(o.com.family), o.com.rho, o.com.rank};
  validate(prior);
  if (!o.load_path.empty()) {
    std::cerr << "amp: loading instance from " << o.load_path << "\n";
    ins = load_instance(o.load_path);
    if (ins.x0.rows() != prior.rank)
      throw domain_error("amp: loaded instance rank does not match --rank");
  } else {
    if (!(o.delta > 0.0)) throw domain_error("amp: --delta must be > 0");
    if (o.n < 1) throw domain_error("amp: --n must be >= 1");
    std::cerr << "amp: sampling instance n=" << o.n << " delta=" << detail::fmt17(o.delta)
              << " seed=" << o.seed << "\n";
    ins = make_instance(prior, o.n, o.delta, o.seed);
  }
  if (!o.dump_path.empty()) {
    dump_instance(ins, o.dump_path);
    std::cerr << "amp: instance written to " << o.dump_path << "\n";
  }

  amp_options run_opt;
  run_opt.tol = o.tol;
  run_opt.max_iter = o.max_iter;
  run_opt.damping = o.damping;

  detail::output_sink sink(o.com.output);
  std::vector<ordered_json> records;
  std::ostringstream csv;
  csv << "n,r,rho,delta,seed,init,iterations,converged,mse,phi\n";
  for (const std::string& init : inits) {
    const amp_init_mode mode = init == "informative" ? amp_init_mode::informative
                                                     : amp_init_mode::uninformative;
    const amp_report rep = amp_run(ins, prior, mode, run_opt);
    std::cerr << "amp init=" << init << ": " << (rep.converged ? "converged" : "stopped")
              << " after " << rep.iterations << " iterations, mse=" << detail::fmt17(rep.mse)
              << "\n";
    if (o.com.format == "json") {
      ordered_json j;
      j["n"] = ins.n;
      j["r"] = prior.rank;
      j["rho"] = prior.rho;
      j["delta"] = ins.delta;
      j["seed"] = ins.seed;
      j["init"] = init;
      j["iterations"] = rep.iterations;
      j["converged"] = rep.converged;
      j["mse"] = rep.mse;
      j["phi"] = rep.phi;
      j["q_trajectory"] = rep.q_trajectory;
      records.push_back(std::move(j));
    } else {
      csv << ins.n << ',' << prior.rank << ',' << detail::fmt17(prior.rho) << ','
          << detail::fmt17(ins.delta) << ',' << ins.seed << ',' << init << ','
          << rep.iterations << ',' << (rep.converged ? "true" : "false") << ','
          << detail::fmt17(rep.mse) << ',' << detail::fmt17(rep.phi) << '\n';
    }
  }
  if (o.com.format == "json") {
    if (records.size() == 1)
      sink.stream() << records.front().dump(2) << "\n";
    else
      sink.stream() << ordered_json(records).dump(2) << "\n";
  } else {
    sink.stream() << csv.str();
  }
  sink.stream().flush();
  return 0;
}

// ---- se --------------------------------------------------------------------

struct se_opts {
  common_opts com;
  double delta = 0.0;
  std::string init = "both";
  double tol = 1e-10;
  int max_iter = 100000;
  double eps = 1e-8;
  bool aitken = false;
};

inline int run_se(const se_opts& o) {
  check_format(o.com.format);
  const std::vector<std::string> inits = init_list(o.init);
  prior_spec prior{parse_family(o.com.family), o.com.rho, o.com.rank};
  validate(prior);
  if (!(o.delta > 0.0)) throw domain_error("se: --delta must be > 0");

  se_options opt;
  opt.tol = o.tol;
  opt.max_iter = o.max_iter;
  opt.eps = o.eps;
  opt.aitken = o.aitken;
  opt.record_trajectory = true;

  detail::output_sink sink(o.com.output);
  std::vector<ordered_json> records;
  std::ostringstream csv;
  csv << "prior,rho,r,delta,init,q_star,mse,phi,iterations,converged\n";
  for (const std::string& init : inits) {
    const se_init mode =
        init == "informative" ? se_init::informative : se_init::uninformative;
    const fixed_point_report rep = se_fixed_point(prior, o.delta, mode, opt);
    std::cerr << "se init=" << init << ": q=" << detail::fmt17(rep.q) << " after "
              << rep.iterations << " iterations\n";
    if (o.com.format == "json") {
      ordered_json j;
      j["prior"] = to_string(prior.family);
      j["rho"] = prior.rho;
      j["r"] = prior.rank;
      j["delta"] = o.delta;
      j["init"] = init;
      j["q_star"] = rep.q;
      j["mse"] = rep.mse;
      j["phi"] = rep.phi;
      j["iterations"] = rep.iterations;
      j["converged"] = rep.converged;
      j["q_trajectory"] = rep.trajectory;
      records.push_back(std::move(j));
    } else {
      csv << to_string(prior.family) << ',' << detail::fmt17(prior.rho) << ',' << prior.rank
          << ',' << detail::fmt17(o.delta) << ',' << init << ',' << detail::fmt17(rep.q) << ','
          << detail::fmt17(rep.mse) << ',' << detail::fmt17(rep.phi) << ',' << rep.iterations
          << ',' << (rep.converged ? "true" : "false") << '\n';
    }
  }
  if (o.com.format == "json") {
    if (records.size() == 1)
      sink.stream() << records.front().dump(2) << "\n";
    else
      sink.stream() << ordered_json(records).dump(2) << "\n";
  } else {
    sink.stream() << csv.str();
  }
  sink.stream().flush();
  return 0;
}

// ---- transitions ------------------------------------------------------------

struct transitions_opts {
  common_opts com;
  std::string along = "delta";
  double delta = 0.0;  // used when along == rho
  std::string bracket = "0.05:0.95";
  double tol = 1e-4;
};

inline std::string opt_cell(const std::optional<double>& v) {
  return v ? detail::fmt17(*v) : std::string();
}

inline ordered_json opt_json(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

inline int run_transitions(const transitions_opts& o) {
  check_format(o.com.format);
  prior_spec prior{parse_family(o.com.family), o.com.rho, o.com.rank};
  validate(prior);
  detail::output_sink sink(o.com.output);

  if (o.along == "delta") {
    std::cerr << "transitions: scanning delta at rho=" << detail::fmt17(prior.rho) << "\n";
    const transition_set ts = find_transitions(prior, o.tol);
    if (o.com.format == "json") {
      ordered_json j;
      j["family"] = to_string(prior.family);
      j["rho"] = prior.rho;
      j["r"] = prior.rank;
      j["delta_u"] = opt_json(ts.delta_u);
      j["delta_amp"] = opt_json(ts.delta_amp);
      j["delta_c"] = opt_json(ts.delta_c);
      j["delta_2nd"] = opt_json(ts.delta_2nd);
      j["order"] = to_string(ts.order);
      sink.stream() << j.dump(2) << "\n";
    } else {
      sink.stream() << "family,rho,r,delta_u,delta_amp,delta_c,delta_2nd,order\n"
                    << to_string(prior.family) << ',' << detail::fmt17(prior.rho) << ','
                    << prior.rank << ',' << opt_cell(ts.delta_u) << ','
                    << opt_cell(ts.delta_amp) << ',' << opt_cell(ts.delta_c) << ','
                    << opt_cell(ts.delta_2nd) << ',' << to_string(ts.order) << "\n";
    }
  } else if (o.along == "rho") {
    if (!(o.delta > 0.0)) throw domain_error("transitions: --along rho requires --delta > 0");
    const std::pair<double, double> br = detail::parse_bracket(o.bracket, "--bracket");
    std::cerr << "transitions: scanning rho at delta=" << detail::fmt17(o.delta) << "\n";
    const rho_transition_set ts =
        find_transitions_rho(prior.family, prior.rank, o.delta, br, o.tol);
    if (o.com.format == "json") {
      ordered_json j;
      j["family"] = to_string(prior.family);
      j["delta"] = o.delta;
      j["r"] = prior.rank;
      j["rho_u"] = opt_json(ts.rho_u);
      j["rho_amp"] = opt_json(ts.rho_amp);
      j["rho_c"] = opt_json(ts.rho_c);
      j["rho_2nd"] = opt_json(ts.rho_2nd);
      j["order"] = to_string(ts.order);
      sink.stream() << j.dump(2) << "\n";
    } else {
      sink.stream() << "family,delta,r,rho_u,rho_amp,rho_c,rho_2nd,order\n"
                    << to_string(prior.family) << ',' << detail::fmt17(o.delta) << ','
                    << prior.rank << ',' << opt_cell(ts.rho_u) << ',' << opt_cell(ts.rho_amp)
                    << ',' << opt_cell(ts.rho_c) << ',' << opt_cell(ts.rho_2nd) << ','
                    << to_string(ts.order) << "\n";
    }
  } else {
    throw domain_error("transitions: --along must be delta or rho");
  }
  sink.stream().flush();
  return 0;
}

// ---- scan ----------------------------------------------------------------

struct scan_opts {
  common_opts com;  // rho unused; grids drive the sweep
  std::string rho_grid;
  std::string delta_grid;
  int threads = 0;
  bool resume = false;
  bool plot = false;
};

inline std::string scan_row(const phase_point& p) {
  std::ostringstream os;
  os << to_string(p.family) << ',' << detail::fmt17(p.rho) << ',' << detail::fmt17(p.delta)
     << ',' << p.r << ',' << detail::fmt17(p.q_uninf) << ',' << detail::fmt17(p.q_inf) << ','
     << detail::fmt17(p.mse_uninf) << ',' << detail::fmt17(p.mse_inf) << ','
     << detail::fmt17(p.phi_uninf) << ',' << detail::fmt17(p.phi_inf) << ','
     << to_string(p.label) << ',' << p.iters_uninf << ',' << p.iters_inf << '\n';
  return os.str();
}

inline std::string scan_key(prior_family family, double rho, double delta, int r) {
  return to_string(family) + "," + detail::fmt17(rho) + "," + detail::fmt17(delta) + "," +
         std::to_string(r);
}

inline void write_plot_script(const std::string& csv_path, std::size_t n_rho,
                              std::size_t n_delta) {
  const std::string path = csv_path + ".gp";
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw io_error("scan: cannot write plot script '" + path + "'");
  f << "# render with: gnuplot -persist " << path << "\n";
  f << "set datafile separator comma\n";
  if (n_rho == 1 && n_delta > 1) {
    f << "set xlabel 'delta'\nset ylabel 'overlap q'\nset key left bottom\n";
    f << "plot '" << csv_path << "' every ::1 using 3:5 with linespoints title 'from scratch', \\\n"
      << "     '" << csv_path << "' every ::1 using 3:6 with linespoints title 'from the signal'\n";
  } else {
    f << "lab(s) = (s eq 'undetectable') ? 0 : (s eq 'hard') ? 1 : (s eq 'amp_optimal') ? 2 : 3\n";
    f << "set palette defined (0 '#4477aa', 1 '#cc6677', 2 '#44aa77', 3 '#aaaaaa')\n";
    f << "set cbrange [0:3]\nunset colorbox\n";
    f << "set xlabel 'delta'\nset ylabel 'rho'\n";
    f << "plot '" << csv_path
      << "' every ::1 using 3:2:(lab(strcol(11))) with points pt 5 ps 1.4 palette notitle\n";
  }
  if (!f) throw io_error("scan: write failed on '" + path + "'");
}

inline int run_scan(const scan_opts& o) {
  const prior_family family = parse_family(o.com.family);
  if (o.com.rank < 1) throw domain_error("scan: --rank must be >= 1");
  const std::vector<double> rho_grid = detail::parse_grid(o.rho_grid, "--rho-grid");
  const std::vector<double> delta_grid = detail::parse_grid(o.delta_grid, "--delta-grid");
  if (o.resume && o.com.output.empty())
    throw domain_error("scan: --resume requires --output");

  // grid order defines both the work list and the output order
  struct point_job {
    double rho, delta;
  };
  std::vector<point_job> jobs;
  for (double rho : rho_grid)
    for (double delta : delta_grid) jobs.push_back({rho, delta});

  // resumption: rows already present in the output are never recomputed
  std::unordered_set<std::string> done_keys;
  bool append = false;
  if (o.resume) {
    std::ifstream existing(o.com.output);
    if (existing) {
      std::string line;
      bool first = true;
      while (std::getline(existing, line)) {
        if (first) {
          first = false;
          continue;  // header
        }
        std::size_t pos = 0;
        for (int comma = 0; comma < 4 && pos != std::string::npos; ++comma)
          pos = line.find(',', pos + 1);
        if (pos != std::string::npos) done_keys.insert(line.substr(0, pos));
      }
      append = !first;  // a header was present: keep the file, append rows
    }
  }

  std::vector<point_job> pending;
  for (const point_job& j : jobs)
    if (done_keys.find(scan_key(family, j.rho, j.delta, o.com.rank)) == done_keys.end())
      pending.push_back(j);

  detail::output_sink sink(o.com.output, append);
  if (!append)
    sink.stream() << "family,rho,delta,r,q_uninf,q_inf,mse_uninf,mse_inf,phi_uninf,phi_inf,"
                     "phase_label,iters_uninf,iters_inf\n";
  sink.stream().flush();

  const unsigned threads = detail::resolve_threads(o.threads);
  std::cerr << "scan: " << pending.size() << " of " << jobs.size() << " points to compute, "
            << threads << " thread(s)\n";

  const int rank = o.com.rank;
  if (threads <= 1 || pending.size() <= 1) {
    std::size_t idx = 0;
    for (const point_job& j : pending) {
      const phase_point p = classify_point(family, j.rho, j.delta, rank);
      sink.stream() << scan_row(p);
      sink.stream().flush();
      ++idx;
      std::cerr << "scan: " << idx << "/" << pending.size() << " rho=" << detail::fmt17(j.rho)
                << " delta=" << detail::fmt17(j.delta) << " " << to_string(p.label) << "\n";
    }
  } else {
    // workers fill results, the main thread streams them in grid order
    std::vector<phase_point> results(pending.size());
    std::vector<char> ready(pending.size(), 0);
    std::atomic<std::size_t> next{0};
    std::mutex m;
    std::condition_variable cv;
    auto worker = [&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= pending.size()) return;
        phase_point p = classify_point(family, pending[i].rho, pending[i].delta, rank);
        {
          std::lock_guard<std::mutex> lk(m);
          results[i] = std::move(p);
          ready[i] = 1;
        }
        cv.notify_all();
      }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::size_t w = 0; w < pending.size(); ++w) {
      std::unique_lock<std::mutex> lk(m);
      cv.wait(lk, [&] { return ready[w] != 0; });
      const phase_point p = results[w];
      lk.unlock();
      sink.stream() << scan_row(p);
      sink.stream().flush();
      std::cerr << "scan: " << (w + 1) << "/" << pending.size()
                << " rho=" << detail::fmt17(p.rho) << " delta=" << detail::fmt17(p.delta)
                << " " << to_string(p.label) << "\n";
    }
    for (std::thread& t : pool) t.join();
  }

  if (o.plot) {
    if (o.com.output.empty()) throw domain_error("scan: --plot requires --output");
    write_plot_script(o.com.output, rho_grid.size(), delta_grid.size());
    std::cerr << "scan: plot script written to " << o.com.output << ".gp\n";
  }
  return 0;
}

}  // namespace cli_impl

// argv-level entry point; returns the process exit code
inline int run_cli(int argc, const char* const* argv) {
  CLI::App app{"low-rank matrix recovery: message passing, state evolution, phase diagrams"};
  app.require_subcommand(1);

  cli_impl::amp_opts ao;
  cli_impl::se_opts so;
  cli_impl::transitions_opts to;
  cli_impl::scan_opts sc;

  auto add_common = [](CLI::App* cmd, cli_impl::common_opts& com, bool with_rho = true) {
    cmd->add_option("--family", com.family, "prior family: gb | spike | rademacher")
        ->capture_default_str();
    if (with_rho)
      cmd->add_option("--rho", com.rho, "nonzero density of the signal")->capture_default_str();
    cmd->add_option("--rank", com.rank, "signal rank r")->capture_default_str();
    cmd->add_option("-o,--output", com.output, "write data here instead of stdout");
    cmd->add_option("--format", com.format, "json | csv")->capture_default_str();
  };

  CLI::App* amp_cmd = app.add_subcommand("amp", "run message passing on a sampled instance");
  add_common(amp_cmd, ao.com);
  amp_cmd->add_option("--n", ao.n, "instance size N")->capture_default_str();
  amp_cmd->add_option("--delta", ao.delta, "noise variance");
  amp_cmd->add_option("--seed", ao.seed, "instance seed")->capture_default_str();
  amp_cmd->add_option("--init", ao.init, "uninformative | informative | both")
      ->capture_default_str();
  amp_cmd->add_option("--tol", ao.tol, "convergence tolerance on the iterate change")
      ->capture_default_str();
  amp_cmd->add_option("--max-iter", ao.max_iter, "iteration cap")->capture_default_str();
  amp_cmd->add_option("--damping", ao.damping, "blend factor toward the previous iterate")
      ->capture_default_str();
  amp_cmd->add_option("--dump", ao.dump_path, "write the instance snapshot to this file");
  amp_cmd->add_option("--load", ao.load_path, "load an instance snapshot instead of sampling");

  CLI::App* se_cmd = app.add_subcommand("se", "iterate the asymptotic overlap recursion");
  add_common(se_cmd, so.com);
  se_cmd->add_option("--delta", so.delta, "noise variance")->required();
  se_cmd->add_option("--init", so.init, "uninformative | informative | both")
      ->capture_default_str();
  se_cmd->add_option("--tol", so.tol, "fixed-point tolerance")->capture_default_str();
  se_cmd->add_option("--max-iter", so.max_iter, "iteration cap")->capture_default_str();
  se_cmd->add_option("--eps", so.eps, "seed overlap of the uninformative branch")
      ->capture_default_str();
  se_cmd->add_flag("--aitken", so.aitken, "accelerate with guarded delta-squared extrapolation");

  CLI::App* tr_cmd = app.add_subcommand("transitions", "locate the critical lines");
  add_common(tr_cmd, to.com);
  tr_cmd->add_option("--along", to.along, "sweep direction: delta | rho")->capture_default_str();
  tr_cmd->add_option("--delta", to.delta, "noise variance (required for --along rho)");
  tr_cmd->add_option("--bracket", to.bracket, "rho bracket lo:hi for --along rho")
      ->capture_default_str();
  tr_cmd->add_option("--tol", to.tol, "bisection tolerance")->capture_default_str();

  CLI::App* scan_cmd = app.add_subcommand("scan", "classify a (rho, delta) grid");
  add_common(scan_cmd, sc.com, /*with_rho=*/false);
  scan_cmd->add_option("--rho-grid", sc.rho_grid, "lo:hi:count[:log] or v1,v2,...")->required();
  scan_cmd->add_option("--delta-grid", sc.delta_grid, "lo:hi:count[:log] or v1,v2,...")
      ->required();
  scan_cmd->add_option("--threads", sc.threads,
                       "worker threads (0 = SPCA_THREADS env or hardware)")
      ->capture_default_str();
  scan_cmd->add_flag("--resume", sc.resume, "skip rows already present in --output");
  scan_cmd->add_flag("--plot", sc.plot, "emit a gnuplot script next to --output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    app.exit(e);
    return 2;
  }

  CLI::App* active = app.get_subcommands().front();
  try {
    if (active == amp_cmd) return cli_impl::run_amp(ao);
    if (active == se_cmd) return cli_impl::run_se(so);
    if (active == tr_cmd) return cli_impl::run_transitions(to);
    return cli_impl::run_scan(sc);
  } catch (const domain_error& e) {
    std::cerr << "error: " << e.what() << "\n\n" << active->help();
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace spca
