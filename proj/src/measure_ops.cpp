#include "relaxctrl/measure_ops.hpp"

#include <stdexcept>

namespace relaxctrl {

double psi_eval(const PsiIntegrand& h, const ControlField& u, double t) {
  const Grid& g = u.grid();
  double sum = 0.0;
  for (int i = 0; i < g.interior_nodes(); ++i) {
    const auto x = g.node_coord(i);
    sum += g.quad_weight(i) *
           h.eval(t, {x.data(), static_cast<std::size_t>(g.dim())}, u.value(i));
  }
  return sum;
}

double composite_eval(const CompositeTestFunctional& v, const ControlField& u,
                      double t) {
  double total = 0.0;
  for (const auto& term : v.terms()) {
    double prod = 1.0;
    for (const auto& factor : term.factors) {
      prod *= factor.outer(psi_eval(factor.inner, u, t));
    }
    total += prod;
  }
  return total;
}

namespace {
void check_row(const Eigen::VectorXd& mu_row, const ControlDictionary& dict) {
  if (mu_row.size() != dict.size()) {
    throw std::invalid_argument("relaxed_eval: weight row length != atom count");
  }
}
}  // namespace

double relaxed_eval(const PsiIntegrand& h, const Eigen::VectorXd& mu_row,
                    const ControlDictionary& dict, double t) {
  check_row(mu_row, dict);
  double sum = 0.0;
  for (int l = 0; l < dict.size(); ++l) {
    sum += mu_row[l] * psi_eval(h, dict.atom(l), t);
  }
  return sum;
}

double relaxed_eval(const CompositeTestFunctional& v,
                    const Eigen::VectorXd& mu_row,
                    const ControlDictionary& dict, double t) {
  check_row(mu_row, dict);
  double sum = 0.0;
  for (int l = 0; l < dict.size(); ++l) {
    sum += mu_row[l] * composite_eval(v, dict.atom(l), t);
  }
  return sum;
}

double young_eval(const PsiIntegrand& h, const SpaceTimeYoungMeasure& nu,
                  int slice, double t) {
  const Grid& g = nu.grid();
  const auto& w = nu.slice(slice);
  double sum = 0.0;
  for (int i = 0; i < g.interior_nodes(); ++i) {
    const auto x = g.node_coord(i);
    double cell = 0.0;
    for (int s = 0; s < nu.support_size(); ++s) {
      const auto& z = nu.support()[s];
      cell += w(i, s) * h.eval(t, {x.data(), static_cast<std::size_t>(g.dim())},
                               {z.data(), z.size()});
    }
    sum += g.quad_weight(i) * cell;
  }
  return sum;
}

double composite_young_eval(const CompositeTestFunctional& v,
                            const SpaceTimeYoungMeasure& nu, int slice,
                            double t) {
  double total = 0.0;
  for (const auto& term : v.terms()) {
    double prod = 1.0;
    for (const auto& factor : term.factors) {
      prod *= factor.outer(young_eval(factor.inner, nu, slice, t));
    }
    total += prod;
  }
  return total;
}

SpaceTimeYoungMeasure two_atomic_slice(const ControlField& u1,
                                       const ControlField& u2,
                                       const NodeMask& A,
                                       const ControlSet& B) {
  if (!(u1.grid().same_spatial(u2.grid())) || u1.m() != u2.m()) {
    throw std::invalid_argument("two_atomic_slice: field mismatch");
  }
  const Grid& g = u1.grid();
  ControlDictionary dict(g, B, {u1, u2});
  Eigen::VectorXd on_A(2), off_A(2);
  on_A << 0.5, 0.5;
  off_A << 0.25, 0.75;
  // Reuse the pushforward merge so coincident u1/u2 values collapse the same
  // way they would for any atom measure.
  SpaceTimeYoungMeasure on = barycenter(on_A, dict);
  SpaceTimeYoungMeasure off = barycenter(off_A, dict);
  Eigen::MatrixXd w(g.interior_nodes(), on.support_size());
  for (int i = 0; i < g.interior_nodes(); ++i) {
    w.row(i) = A.contains(i) ? on.slice(0).row(i) : off.slice(0).row(i);
  }
  return SpaceTimeYoungMeasure(g, on.support(), {std::move(w)});
}

RelaxedControl choquet_represent(const ControlField& u1,
                                 const ControlField& u2, const NodeMask& A,
                                 const ControlSet& B, double a) {
  if (!(a >= 0.0 && a <= 0.25)) {
    throw std::invalid_argument("choquet_represent: a must lie in [0, 1/4]");
  }
  const Grid& g = u1.grid();
  const int m = u1.m();
  auto switched = [&](bool idA_is_u2) {
    std::vector<double> values(static_cast<std::size_t>(g.interior_nodes()) * m);
    for (int i = 0; i < g.interior_nodes(); ++i) {
      const auto z = (A.contains(i) == idA_is_u2) ? u2.value(i) : u1.value(i);
      for (int c = 0; c < m; ++c) values[static_cast<std::size_t>(i) * m + c] = z[c];
    }
    return ControlField(g, m, std::move(values));
  };
  // u11 = u1, u22 = u2, u12 = u1 on A / u2 off A, u21 = u2 on A / u1 off A.
  std::vector<ControlField> atoms{u1, switched(false), switched(true), u2};
  auto dict = std::make_shared<const ControlDictionary>(g, B, std::move(atoms));
  Eigen::VectorXd mu(4);
  mu << a, 0.5 - a, 0.25 - a, 0.25 + a;
  return RelaxedControl::static_row(dict, mu);
}

SpaceTimeYoungMeasure barycenter(const Eigen::VectorXd& mu_row,
                                 const ControlDictionary& dict) {
  if (mu_row.size() != dict.size()) {
    throw std::invalid_argument("barycenter: weight row length != atom count");
  }
  const Grid& g = dict.grid();
  const int m = dict.atom(0).m();
  // Global support: distinct nodal values in order of first appearance,
  // scanning nodes then atoms.
  std::vector<std::vector<double>> support;
  std::vector<std::vector<int>> node_atom_support(
      g.interior_nodes(), std::vector<int>(dict.size()));
  for (int i = 0; i < g.interior_nodes(); ++i) {
    for (int l = 0; l < dict.size(); ++l) {
      const auto z = dict.atom(l).value(i);
      int found = -1;
      for (std::size_t s = 0; s < support.size(); ++s) {
        bool eq = true;
        for (int c = 0; c < m; ++c) {
          if (support[s][c] != z[c]) eq = false;
        }
        if (eq) {
          found = static_cast<int>(s);
          break;
        }
      }
      if (found < 0) {
        support.emplace_back(z.begin(), z.end());
        found = static_cast<int>(support.size()) - 1;
      }
      node_atom_support[i][l] = found;
    }
  }
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(g.interior_nodes(), support.size());
  for (int i = 0; i < g.interior_nodes(); ++i) {
    for (int l = 0; l < dict.size(); ++l) {
      w(i, node_atom_support[i][l]) += mu_row[l];
    }
  }
  return SpaceTimeYoungMeasure(g, std::move(support), {std::move(w)});
}

}  // namespace relaxctrl
