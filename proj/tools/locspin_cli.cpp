// locspin: command-line driver for the AKLT and bond-alternating chain
// computations. Every run writes into one output directory and leaves a
// manifest listing its outputs.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "locspin/locspin.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace locspin;

namespace {

enum Exit { ok = 0, numerical = 1, usage = 2 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<int> parse_range(const std::string& s) {
  const auto colon = s.find(':');
  try {
    if (colon == std::string::npos) return {std::stoi(s)};
    const int a = std::stoi(s.substr(0, colon)), b = std::stoi(s.substr(colon + 1));
    if (b < a) throw UsageError("empty range '" + s + "'");
    std::vector<int> out;
    for (int i = a; i <= b; ++i) out.push_back(i);
    return out;
  } catch (const std::logic_error&) {
    throw UsageError("bad range '" + s + "' (expected a:b)");
  }
}

json to_json(const std::vector<double>& v) {
  json j = json::array();
  for (double x : v) j.push_back(x);
  return j;
}

json fit_json(const SweepResult& s) {
  if (!s.has_fit) return nullptr;
  return {{"column", s.fit_column},   {"slope", s.fit.slope}, {"intercept", s.fit.intercept},
          {"decay_length", s.fit.decay_length}, {"r2", s.fit.r2},
          {"range", {s.fit.x_first, s.fit.x_last}}, {"points", s.fit.points}};
}

/// Shared state of one run: output directory, lock, collected outputs and
/// the manifest being built.
struct Run {
  std::string command;
  fs::path dir;
  std::optional<io::DirectoryLock> lock;
  std::optional<io::OutputSet> out;
  json results = json::object();
  std::string config;

  void open(const fs::path& out_dir) {
    dir = out_dir.is_absolute() ? out_dir : io::output_root(fs::current_path()) / out_dir;
    try {
      lock.emplace(dir);
    } catch (const io::IoError& e) {
      throw UsageError(e.what());
    }
    out.emplace(dir);
  }

  std::string stem() const {
    std::string s = command;
    for (char& c : s)
      if (c == ' ') c = '_';
    return s;
  }

  void write(const std::string& suffix, const std::string& content) { out->write(stem() + suffix, content); }

  void sweep(const std::string& suffix, const SweepResult& s, const std::string& title) {
    write(suffix + ".csv", io::to_csv(io::sweep_table(s)));
    write(suffix + ".svg", io::sweep_svg(s, title));
  }

  void finish(const std::string& status) {
    if (!out) return;
    json m;
    m["tool"] = "locspin";
    m["version"] = LOCSPIN_VERSION;
    m["command"] = command;
    m["status"] = status;
    m["partial"] = status != "ok";
    m["config"] = config;
    m["results"] = results;
    json files = json::array();
    for (const auto& f : out->files()) files.push_back(f);
    files.push_back(stem() + ".manifest.json");
    m["outputs"] = files;
    io::detail::write_file(dir / (stem() + ".manifest.json"), m.dump(2) + "\n");
  }
};

// ---------------------------------------------------------------------------
// aklt

struct AkltArgs {
  std::string range = "-10:10";
  bool edge = false;
  int sep = 2;
  std::string positions = "0";
  std::vector<double> field{0.0, 0.0, 1.0};
  std::string field_range = "0:0";
  int seeds = 10;
  int sep1 = 1, sep2 = 1;
  std::uint64_t seed = 1;
  int k = 3;
  std::string l1 = "0:5", l3 = "0:5";
  int l2 = 1;
};

void aklt_profile(Run& run, const AkltArgs& a) {
  io::Table t;
  const auto sites = parse_range(a.range);
  if (a.edge) {
    t.header = {"i", "edge_closed_form", "edge_contraction"};
    double sum = 0;
    for (int i : sites) {
      if (i < 1) throw UsageError("edge profile needs sites >= 1");
      t.add_row({double(i), aklt::edge_profile(i), aklt::edge_profile_via_contraction(i)});
      sum += aklt::edge_profile(i);
    }
    run.results["sum"] = sum;
  } else {
    t.header = {"i", "f_closed_form", "f_contraction"};
    const WindowMps w = aklt::impurity_state({0}, {aklt::Loc::up});
    double sum = 0;
    for (int i : sites) {
      t.add_row({double(i), aklt::single_impurity_profile(i), aklt::profile_via_contraction(w, i)});
      sum += aklt::single_impurity_profile(i);
    }
    run.results["sum"] = sum;
  }
  run.write(".csv", io::to_csv(t));
}

void aklt_gram(Run& run, const AkltArgs& a) {
  const Matrix f = aklt::gram_matrix(a.sep), c = aklt::gram_matrix_contraction(a.sep);
  io::Table t;
  t.header = {"row", "col", "formula", "contraction"};
  t.meta.emplace_back("L", std::to_string(a.sep));
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) t.add_row({double(i), double(j), f(i, j).real(), c(i, j).real()});
  run.results["max_difference"] = max_abs(f - c);
  run.results["delta_L"] = aklt::delta_l(a.sep);
  run.write(".csv", io::to_csv(t));
}

void aklt_qubit_basis(Run& run, const AkltArgs& a) {
  const aklt::QubitBasis q = aklt::qubit_basis(a.sep);
  const Matrix g = aklt::gram_matrix_contraction(a.sep);
  const Matrix id = q.transform.adjoint() * g * q.transform;
  io::Table t;
  t.header = {"row", "col", "transform"};
  t.meta.emplace_back("beta_plus", format_double(q.beta_plus));
  t.meta.emplace_back("beta_minus", format_double(q.beta_minus));
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) t.add_row({double(i), double(j), q.transform(i, j).real()});
  run.results["beta_plus"] = q.beta_plus;
  run.results["beta_minus"] = q.beta_minus;
  run.results["orthonormality_error"] = max_abs(id - Matrix::Identity(4, 4));
  run.write(".csv", io::to_csv(t));
}

void aklt_field_matrix(Run& run, const AkltArgs& a) {
  std::vector<int> pos;
  for (const auto& p : CLI::detail::split(a.positions, ',')) pos.push_back(std::stoi(p));
  if (a.field.size() != 3) throw UsageError("--field takes three components");
  aklt::Field f;
  for (int i : parse_range(a.field_range)) f[i] = Eigen::Vector3d(a.field[0], a.field[1], a.field[2]);
  const Matrix closed = aklt::effective_field_matrix(f, pos);
  const Matrix contr = aklt::field_matrix_contraction(pos, f);
  io::Table t;
  t.header = {"row", "col", "closed_re", "closed_im", "contraction_re", "contraction_im"};
  for (Eigen::Index i = 0; i < closed.rows(); ++i)
    for (Eigen::Index j = 0; j < closed.cols(); ++j)
      t.add_row({double(i), double(j), closed(i, j).real(), closed(i, j).imag(), contr(i, j).real(), contr(i, j).imag()});
  run.results["max_difference"] = max_abs(closed - contr);
  run.write(".csv", io::to_csv(t));
}

void aklt_three_spin(Run& run, const AkltArgs& a) {
  const aklt::NoGoReport r = aklt::three_spin_no_go_test(a.seeds, a.sep1, a.sep2, a.seed, a.k);
  io::Table t;
  t.header = {"k", "configurations", "resampled", "max_principal_angle", "dependent"};
  t.add_row({double(a.k), double(r.configurations), double(r.resampled), r.max_subspace_angle, r.dependent ? 1.0 : 0.0});
  run.results["dependent"] = r.dependent;
  run.results["max_principal_angle"] = r.max_subspace_angle;
  run.results["resampled"] = r.resampled;
  run.write(".csv", io::to_csv(t));
}

void aklt_scattering(Run& run, const AkltArgs& a) {
  io::Table t;
  t.header = {"L", "Lp", "Lpp", "contraction", "triple_path", "stated_closed_form", "path_closed_form"};
  double worst_stated = 0, worst_path = 0;
  for (int l1 : parse_range(a.l1))
    for (int l3 : parse_range(a.l3)) {
      const auto s = aklt::scattering_amplitude(l1, a.l2, l3);
      t.add_row({double(l1), double(a.l2), double(l3), s.contraction, s.triple_path, s.stated_closed_form,
                 s.path_closed_form});
      worst_stated = std::max(worst_stated, std::abs(s.triple_path - s.stated_closed_form));
      worst_path = std::max(worst_path, std::abs(s.triple_path - s.path_closed_form));
    }
  run.results["max_difference_stated_form"] = worst_stated;
  run.results["max_difference_path_form"] = worst_path;
  run.write(".csv", io::to_csv(t));
}

// ---------------------------------------------------------------------------
// abahc

struct AbahcArgs {
  double delta = 0.03;
  int dim = 16;
  double tol = 1e-8;
  int max_iter = 500;
  std::uint64_t seed = 1;
  std::string checkpoint;
  int n = 0;
  double hz = 1e-3;
  bool hz_given = false;
  int range = 60;
  int m_max = 20;
  std::string n_list = "0:10";
  int n_max = 12;
  std::string l_list = "6:14";
  bool optimize = false;
  double gap = 0.145;
  double tdvp_tol = 1e-9;
  double dtau = 0.1;
  double dtau_floor = 1e-3;
  int max_steps = 20000;
};

struct LoadedBackground {
  UniformMps state;
  double delta = 0.0;
  double xi = 0.0;
};

LoadedBackground load_background(const Run& run, const AbahcArgs& a) {
  fs::path p = a.checkpoint.empty() ? run.dir / "abahc_vumps.ckpt" : fs::path(a.checkpoint);
  if (!fs::exists(p)) throw UsageError("missing checkpoint " + p.string() + " (run 'abahc vumps' first)");
  io::UniformCheckpoint c;
  try {
    c = io::load_uniform_checkpoint(p);
  } catch (const io::IoError& e) {
    throw UsageError(e.what());
  }
  LoadedBackground b;
  b.state = c.state;
  b.delta = c.params.count("delta") ? c.params.at("delta") : a.delta;
  b.xi = spectral_data(b.state.al, b.state.al, 3).xi;
  return b;
}

TdvpOptions tdvp_options(const AbahcArgs& a) {
  TdvpOptions o;
  o.tol = a.tdvp_tol;
  o.dtau = a.dtau;
  o.dtau_floor = a.dtau_floor;
  o.max_steps = a.max_steps;
  return o;
}

void abahc_vumps(Run& run, const AbahcArgs& a) {
  VumpsOptions o;
  o.tol = a.tol;
  o.max_iter = a.max_iter;
  o.seed = a.seed;
  const Matrix h = AbahcHamiltonian{a.delta, 0.0}.bond();
  VumpsResult r;
  try {
    r = vumps_ground_state(h, 4, a.dim, o);
  } catch (const VumpsError& e) {
    run.results["gradient"] = e.last_residual();
    run.write(".ckpt.partial", io::serialize_uniform(e.best().state, {{"delta", a.delta}}));
    throw;
  }
  const SpectralData sd = spectral_data(r.state.al, r.state.al, 3);
  io::Table t;
  t.header = {"iteration", "energy_per_cell", "gradient"};
  for (std::size_t i = 0; i < r.energy_history.size(); ++i)
    t.add_row({double(i + 1), r.energy_history[i], r.gradient_history[i]});
  run.write(".ckpt", io::serialize_uniform(r.state, {{"delta", a.delta}}));
  run.write(".csv", io::to_csv(t));
  run.results["energy_per_site"] = r.state.energy_density / 2.0;
  run.results["xi_bulk"] = sd.xi;
  run.results["lambda2_abs"] = std::abs(sd.values[1]);
  run.results["iterations"] = r.iterations;
  run.results["gradient"] = r.state.gradient;
}

void abahc_defect(Run& run, const AbahcArgs& a) {
  const LoadedBackground b = load_background(run, a);
  const AbahcHamiltonian ham{b.delta, a.hz};
  const Background bg = make_background(b.state, ham.bond());
  const DefectSpec def = weak_weak_defect(ham);
  const CenterSolution c = solve_center(bg, def, a.seed);
  WindowMps w = c.state;
  double energy = c.energy;
  if (a.n > 0) {
    const WindowOptimization opt = optimize_window(bg, def, a.n, tdvp_options(a), WindowInit::vacuum, a.seed);
    w = opt.state;
    energy = opt.energy;
    run.results["tdvp_steps"] = opt.steps;
  }
  const SiteProfile p = defect_profile(w, a.range);
  io::Table t;
  t.header = {"site", "sz"};
  for (std::size_t i = 0; i < p.sites.size(); ++i) t.add_row({double(p.sites[i]), p.values[i]});
  run.write("_profile.csv", io::to_csv(t));
  const SweepResult eps = epsilon_sweep(bg, def, c.state, a.m_max, b.xi);
  run.sweep("_eps", eps, "tangent weights eps_m");
  const std::string ckpt_ref = a.checkpoint.empty() ? "abahc_vumps.ckpt" : fs::absolute(a.checkpoint).string();
  run.write(".window.ckpt", io::serialize_window(w, ckpt_ref));
  run.results["N"] = a.n;
  run.results["energy"] = energy;
  run.results["profile_sum"] = p.sum();
  run.results["xi_bulk"] = b.xi;
  run.results["eps_fit"] = fit_json(eps);
}

void abahc_window_sweep(Run& run, const AbahcArgs& a) {
  const LoadedBackground b = load_background(run, a);
  const AbahcHamiltonian ham{b.delta, a.hz};
  const Background bg = make_background(b.state, ham.bond());
  SweepOptions so;
  so.tdvp = tdvp_options(a);
  so.seed = a.seed;
  so.xi = b.xi;
  const SweepResult s = window_sweep(bg, weak_weak_defect(ham), parse_range(a.n_list), a.n_max, so);
  run.sweep("", s, "window length against fidelity distance");
  run.results["xi_bulk"] = b.xi;
  run.results["fit"] = fit_json(s);
  run.results["amplitude_at_N0"] = s.amplitude_at_origin;
  run.results["distance"] = to_json(s.column("distance"));
}

void abahc_jeff(Run& run, const AbahcArgs& a) {
  if (a.optimize && !a.hz_given) throw UsageError("--optimize requires --hz");
  const LoadedBackground b = load_background(run, a);
  const AbahcHamiltonian ham{b.delta, a.hz};
  const Background bg = make_background(b.state, ham.bond());
  const DefectSpec def = weak_weak_defect(ham);
  const CenterSolution c = solve_center(bg, def, a.seed);
  JeffOptions jo;
  jo.optimize = a.optimize;
  jo.hz = a.hz;
  jo.gap = a.gap;
  jo.tdvp = tdvp_options(a);
  jo.xi = b.xi;
  const SweepResult s = jeff_sweep(bg, def, c.state.tensors[0], parse_range(a.l_list), jo);
  run.sweep("", s, "effective exchange J_eff(L)");
  run.results["xi_bulk"] = b.xi;
  run.results["fit"] = fit_json(s);
  run.results["J_eff"] = to_json(s.column("J_eff"));
  if (a.optimize) run.results["J_eff_optimized"] = to_json(s.column("J_eff_optimized"));
  if (!s.warnings.empty()) run.results["warnings"] = s.warnings;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Localized effective spins in gapped spin chains"};
  app.set_version_flag("--version", std::string(LOCSPIN_VERSION));
  app.set_config("--config", "", "Configuration file (sections per subcommand, flags win)");
  app.require_subcommand(1);
  std::string out_dir = "locspin-out";
  app.add_option("-o,--out", out_dir, "Output directory (relative to $LOCSPIN_OUTPUT_ROOT when set)");

  Run run;
  AkltArgs ak;
  AbahcArgs ab;
  std::function<void(Run&)> action;

  auto* aklt_cmd = app.add_subcommand("aklt", "Exact AKLT impurity states")->require_subcommand(1);
  {
    auto* c = aklt_cmd->add_subcommand("profile", "Impurity or edge magnetization profile");
    c->add_option("--range", ak.range, "Site range a:b");
    c->add_flag("--edge", ak.edge, "Edge profile of a half-infinite chain");
    c->callback([&] { action = [&](Run& r) { aklt_profile(r, ak); }; });

    c = aklt_cmd->add_subcommand("gram", "Gram matrix of the two-impurity basis");
    c->add_option("--L", ak.sep, "Impurity separation")->check(CLI::Range(2, 1000));
    c->callback([&] { action = [&](Run& r) { aklt_gram(r, ak); }; });

    c = aklt_cmd->add_subcommand("qubit-basis", "Orthonormalizing transform sqrt(G)^-1");
    c->add_option("--L", ak.sep, "Impurity separation")->check(CLI::Range(2, 1000));
    c->callback([&] { action = [&](Run& r) { aklt_qubit_basis(r, ak); }; });

    c = aklt_cmd->add_subcommand("field-matrix", "Effective Zeeman matrix, closed form and contraction");
    c->add_option("--positions", ak.positions, "Impurity positions, comma separated (one or two)");
    c->add_option("--field", ak.field, "Field components hx hy hz")->expected(3);
    c->add_option("--field-range", ak.field_range, "Sites a:b carrying the field");
    c->callback([&] { action = [&](Run& r) { aklt_field_matrix(r, ak); }; });

    c = aklt_cmd->add_subcommand("three-spin-test", "Eigenvector frames for random site fields");
    c->add_option("--seeds", ak.seeds, "Number of field configurations")->check(CLI::Range(2, 100000));
    c->add_option("--L", ak.sep1, "First separation")->check(CLI::Range(1, 1000));
    c->add_option("--Lp", ak.sep2, "Second separation")->check(CLI::Range(1, 1000));
    c->add_option("--seed", ak.seed, "Random seed");
    c->add_option("--k", ak.k, "Number of effective spins (2 or 3)")->check(CLI::IsMember({2, 3}));
    c->callback([&] { action = [&](Run& r) { aklt_three_spin(r, ak); }; });

    c = aklt_cmd->add_subcommand("scattering", "Three-impurity scattering amplitudes");
    c->add_option("--L", ak.l1, "Range a:b of the first separation");
    c->add_option("--Lp", ak.l2, "Middle separation")->check(CLI::Range(0, 1000));
    c->add_option("--Lpp", ak.l3, "Range a:b of the last separation");
    c->callback([&] { action = [&](Run& r) { aklt_scattering(r, ak); }; });
  }

  auto* abahc_cmd = app.add_subcommand("abahc", "Bond-alternating Heisenberg chain")->require_subcommand(1);
  {
    const auto common = [&](CLI::App* c) {
      c->add_option("--checkpoint", ab.checkpoint, "Uniform checkpoint (default: <out>/abahc_vumps.ckpt)");
      c->add_option("--seed", ab.seed, "Seed for random initial tensors");
      c->add_option("--tdvp-tol", ab.tdvp_tol, "Fidelity distance between successive TDVP states");
      c->add_option("--dtau", ab.dtau, "Initial imaginary time step");
      c->add_option("--dtau-floor", ab.dtau_floor, "Smallest step before giving up");
      c->add_option("--max-steps", ab.max_steps, "TDVP step budget");
    };
    auto* c = abahc_cmd->add_subcommand("vumps", "Uniform ground state");
    c->add_option("--delta", ab.delta, "Dimerization delta")->check(CLI::Range(-1.0, 1.0));
    c->add_option("--D", ab.dim, "Bond dimension")->check(CLI::Range(1, 4096));
    c->add_option("--tol", ab.tol, "Gradient tolerance");
    c->add_option("--max-iter", ab.max_iter, "Iteration limit");
    c->add_option("--seed", ab.seed, "Seed of the random initial state");
    c->callback([&] { action = [&](Run& r) { abahc_vumps(r, ab); }; });

    c = abahc_cmd->add_subcommand("defect", "Weak-weak defect window and profile");
    common(c);
    c->add_option("--N", ab.n, "Window half-length")->check(CLI::Range(0, 1000));
    c->add_option("--hz", ab.hz, "Uniform field");
    c->add_option("--range", ab.range, "Profile sites -r..r")->check(CLI::Range(0, 100000));
    c->add_option("--M", ab.m_max, "Tangent weight range")->check(CLI::Range(1, 10000));
    c->callback([&] { action = [&](Run& r) { abahc_defect(r, ab); }; });

    c = abahc_cmd->add_subcommand("window-sweep", "Fidelity distance against window length");
    common(c);
    c->add_option("--N", ab.n_list, "Window half-lengths a:b");
    c->add_option("--Nmax", ab.n_max, "Reference window half-length")->check(CLI::Range(0, 1000));
    c->add_option("--hz", ab.hz, "Uniform field");
    c->callback([&] { action = [&](Run& r) { abahc_window_sweep(r, ab); }; });

    c = abahc_cmd->add_subcommand("jeff", "Effective exchange of two defects");
    common(c);
    c->add_option("--L", ab.l_list, "Separations a:b in unit cells");
    auto* hz = c->add_option("--hz", ab.hz, "Uniform field (required with --optimize)");
    c->add_flag("--optimize", ab.optimize, "Also re-optimize the window between the defects");
    c->add_option("--gap", ab.gap, "Energy gap Delta E bounding the field");
    c->callback([&, hz] {
      ab.hz_given = hz->count() > 0;
      action = [&](Run& r) { abahc_jeff(r, ab); };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return usage;
  }

  for (CLI::App* top : app.get_subcommands())
    for (CLI::App* sub : top->get_subcommands()) {
      run.command = top->get_name() + " " + sub->get_name();
      run.config = sub->config_to_str(true, false);
    }

  try {
    run.open(out_dir);
    action(run);
    run.finish("ok");
    std::cout << run.results.dump(2) << "\n";
    return ok;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return usage;
  } catch (const io::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    run.finish("failed");
    return usage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    run.finish("failed");
    return usage;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    run.results["error"] = e.what();
    try {
      run.finish("failed");
    } catch (const std::exception&) {
    }
    return numerical;
  }
}
