#include "relaxctrl/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace relaxctrl {

json grid_to_json(const Grid& grid) {
  json j;
  j["dim"] = grid.dim();
  std::vector<int> nx;
  std::vector<double> extent;
  for (int a = 0; a < grid.dim(); ++a) {
    nx.push_back(grid.nx(a));
    extent.push_back(grid.extent(a));
  }
  j["nx"] = nx;
  j["extent"] = extent;
  j["nt"] = grid.nt();
  j["T"] = grid.T();
  return j;
}

Grid grid_from_json(const json& j) {
  return Grid::make(j.at("dim").get<int>(), j.at("nx").get<std::vector<int>>(),
                    j.at("extent").get<std::vector<double>>(),
                    j.at("nt").get<int>(), j.at("T").get<double>());
}

json control_set_to_json(const ControlSet& B) {
  json j;
  if (B.kind() == ControlSet::Kind::Box) {
    j["kind"] = "box";
    j["lo"] = B.lo();
    j["hi"] = B.hi();
  } else {
    j["kind"] = "points";
    j["points"] = B.points();
  }
  return j;
}

ControlSet control_set_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "box") {
    return ControlSet::box(j.at("lo").get<std::vector<double>>(),
                           j.at("hi").get<std::vector<double>>());
  }
  if (kind == "points") {
    return ControlSet::finite_points(
        j.at("points").get<std::vector<std::vector<double>>>());
  }
  throw std::invalid_argument("control set: unknown kind '" + kind + "'");
}

namespace {

json atoms_to_json(const ControlDictionary& dict) {
  // Atom-major, node-minor, component-innermost.
  json atoms = json::array();
  for (int l = 0; l < dict.size(); ++l) {
    const ControlField& u = dict.atom(l);
    json nodes = json::array();
    for (int i = 0; i < u.grid().interior_nodes(); ++i) {
      const auto z = u.value(i);
      nodes.push_back(std::vector<double>(z.begin(), z.end()));
    }
    atoms.push_back(std::move(nodes));
  }
  return atoms;
}

DictionaryPtr dictionary_from_json(const Grid& grid, const json& j) {
  const ControlSet B = control_set_from_json(j.at("control_set"));
  std::vector<ControlField> fields;
  for (const auto& atom : j.at("atoms")) {
    std::vector<double> values;
    for (const auto& node : atom) {
      for (const auto& comp : node) values.push_back(comp.get<double>());
    }
    fields.emplace_back(grid.with_time_steps(1), B.m(), std::move(values));
  }
  return std::make_shared<const ControlDictionary>(grid.with_time_steps(1), B,
                                                   std::move(fields));
}

}  // namespace

json relaxed_control_to_json(const RelaxedControl& mu) {
  json j;
  j["type"] = "relaxed_control";
  j["grid"] = grid_to_json(mu.grid());
  j["dictionary"] = {
      {"m", mu.dictionary().control_set().m()},
      {"control_set", control_set_to_json(mu.dictionary().control_set())},
      {"atoms", atoms_to_json(mu.dictionary())},
  };
  json rows = json::array();
  for (int k = 0; k < mu.steps(); ++k) {
    json row = json::array();
    for (int l = 0; l < mu.atoms(); ++l) row.push_back(mu.weights()(k, l));
    rows.push_back(std::move(row));
  }
  j["weights"] = std::move(rows);
  return j;
}

RelaxedControl relaxed_control_from_json(const json& j) {
  if (j.at("type").get<std::string>() != "relaxed_control") {
    throw std::invalid_argument("relaxed control: wrong type tag");
  }
  const Grid grid = grid_from_json(j.at("grid"));
  DictionaryPtr dict = dictionary_from_json(grid, j.at("dictionary"));
  const auto& rows = j.at("weights");
  Eigen::MatrixXd w(rows.size(), dict->size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (static_cast<int>(rows[k].size()) != dict->size()) {
      throw std::invalid_argument("relaxed control: row length mismatch");
    }
    for (int l = 0; l < dict->size(); ++l) w(k, l) = rows[k][l].get<double>();
  }
  return RelaxedControl(grid, std::move(dict), std::move(w));
}

json young_measure_to_json(const SpaceTimeYoungMeasure& nu) {
  json j;
  j["type"] = "spacetime_young_measure";
  j["grid"] = grid_to_json(nu.grid());
  j["support"] = nu.support();
  json slices = json::array();
  for (int k = 0; k < nu.slices(); ++k) {
    const auto& w = nu.slice(k);
    json nodes = json::array();
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      json row = json::array();
      for (Eigen::Index s = 0; s < w.cols(); ++s) row.push_back(w(i, s));
      nodes.push_back(std::move(row));
    }
    slices.push_back(std::move(nodes));
  }
  j["weights"] = std::move(slices);
  return j;
}

SpaceTimeYoungMeasure young_measure_from_json(const json& j) {
  if (j.at("type").get<std::string>() != "spacetime_young_measure") {
    throw std::invalid_argument("young measure: wrong type tag");
  }
  const Grid grid = grid_from_json(j.at("grid"));
  auto support = j.at("support").get<std::vector<std::vector<double>>>();
  std::vector<Eigen::MatrixXd> slices;
  for (const auto& slice : j.at("weights")) {
    Eigen::MatrixXd w(slice.size(), support.size());
    for (std::size_t i = 0; i < slice.size(); ++i) {
      for (std::size_t s = 0; s < support.size(); ++s) {
        w(i, s) = slice[i][s].get<double>();
      }
    }
    slices.push_back(std::move(w));
  }
  return SpaceTimeYoungMeasure(grid, std::move(support), std::move(slices));
}

json report_to_json(const SolveReport& report) {
  json j;
  j["cost_history"] = report.cost_history;
  j["mp_history"] = report.mp_history;
  j["final_cost"] = report.final_cost;
  j["per_time_residual"] = report.per_time_residual;
  j["max_residual"] = report.max_residual;
  j["fw_gap"] = report.fw_gap;
  j["hamiltonian_profile"] = report.hamiltonian_profile;
  j["hamiltonian_dispersion"] = report.hamiltonian_dispersion;
  j["iterations"] = report.iterations;
  j["termination"] = report.termination;
  j["step_rule"] = report.step_rule;
  j["direction"] = report.direction;
  json runs = json::array();
  for (const auto& r : report.restart_runs) {
    runs.push_back({{"seed", r.seed},
                    {"final_cost", r.final_cost},
                    {"termination", r.termination}});
  }
  j["restart_runs"] = std::move(runs);
  return j;
}

json trajectory_to_json(const Trajectory& y) {
  json j;
  j["grid"] = grid_to_json(y.grid);
  j["n"] = y.n;
  json rows = json::array();
  for (const auto& row : y.rows) {
    rows.push_back(std::vector<double>(row.data(), row.data() + row.size()));
  }
  j["rows"] = std::move(rows);
  return j;
}

void trajectory_to_csv(const Trajectory& y, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  const Grid& g = y.grid;
  const int N = g.interior_nodes();
  out << "# relaxctrl trajectory\n";
  out << "# dim=" << g.dim();
  out << " nx=";
  for (int a = 0; a < g.dim(); ++a) out << (a ? "x" : "") << g.nx(a);
  out << " extent=";
  for (int a = 0; a < g.dim(); ++a) out << (a ? "x" : "") << g.extent(a);
  out << " nt=" << g.nt() << " T=" << g.T() << " n=" << y.n
      << " nodes=" << N << "\n";
  out << "t";
  for (int i = 0; i < N; ++i) {
    for (int c = 0; c < y.n; ++c) out << ",node" << i << "_c" << c;
  }
  out << "\n";
  char buf[32];
  for (std::size_t k = 0; k < y.rows.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", g.time(static_cast<int>(k)));
    out << buf;
    for (int i = 0; i < N; ++i) {
      for (int c = 0; c < y.n; ++c) {
        std::snprintf(buf, sizeof buf, "%.17g",
                      y.rows[k][static_cast<Eigen::Index>(c) * N + i]);
        out << ',' << buf;
      }
    }
    out << "\n";
  }
}

void write_profile_csv(const std::string& path, const std::string& column,
                       const std::vector<double>& values, double dt) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "t," << column << "\n";
  char buf[32];
  for (std::size_t k = 0; k < values.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", k * dt);
    out << buf;
    std::snprintf(buf, sizeof buf, "%.17g", values[k]);
    out << ',' << buf << "\n";
  }
}

void write_text_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << contents;
  if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace relaxctrl
