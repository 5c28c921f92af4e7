#include "relaxctrl/chatter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace relaxctrl {

std::vector<int> largest_remainder_counts(const Eigen::VectorXd& weights,
                                          int k) {
  const int L = static_cast<int>(weights.size());
  std::vector<int> counts(L);
  std::vector<double> rem(L);
  int assigned = 0;
  for (int l = 0; l < L; ++l) {
    const double q = k * weights[l];
    counts[l] = static_cast<int>(std::floor(q));
    rem[l] = q - counts[l];
    assigned += counts[l];
  }
  int left = k - assigned;
  std::vector<int> order(L);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return rem[a] > rem[b]; });
  for (int i = 0; i < left; ++i) counts[order[i]] += 1;
  return counts;
}

std::vector<int> quota_sequence(const std::vector<int>& counts) {
  const int L = static_cast<int>(counts.size());
  const int k = std::accumulate(counts.begin(), counts.end(), 0);
  std::vector<int> seq(k);
  std::vector<int> assigned(L, 0);
  for (int j = 0; j < k; ++j) {
    int pick = -1;
    double best = -std::numeric_limits<double>::infinity();
    for (int l = 0; l < L; ++l) {
      if (assigned[l] >= counts[l]) continue;
      const double deficit =
          static_cast<double>(j + 1) * counts[l] / k - assigned[l];
      if (deficit > best) {
        best = deficit;
        pick = l;
      }
    }
    seq[j] = pick;
    assigned[pick] += 1;
  }
  return seq;
}

RelaxedControl ChatterSchedule::as_dirac_control() const {
  const Grid refined = coarse_grid.with_time_steps(
      coarse_grid.nt() * refinement);
  std::vector<int> flat;
  flat.reserve(static_cast<std::size_t>(refined.nt()));
  for (const auto& step : substep_atoms) {
    flat.insert(flat.end(), step.begin(), step.end());
  }
  return RelaxedControl::dirac_path(refined, dict, flat);
}

ChatterSchedule chatter_time(const RelaxedControl& mu, int k) {
  if (k < 1) throw std::invalid_argument("chatter_time: refinement >= 1");
  ChatterSchedule s;
  s.coarse_grid = mu.grid();
  s.dict = mu.dictionary_ptr();
  s.refinement = k;
  s.substep_atoms.resize(mu.steps());
  for (int step = 0; step < mu.steps(); ++step) {
    s.substep_atoms[step] =
        quota_sequence(largest_remainder_counts(mu.row(step), k));
  }
  return s;
}

double chatter_time_pairing(const ChatterSchedule& s, const PsiIntegrand& h) {
  const double dt_sub = s.coarse_grid.dt() / s.refinement;
  double sum = 0.0;
  for (int step = 0; step < static_cast<int>(s.substep_atoms.size()); ++step) {
    for (int j = 0; j < s.refinement; ++j) {
      const double t = s.coarse_grid.time(step) + (j + 0.5) * dt_sub;
      sum += dt_sub * psi_eval(h, s.dict->atom(s.substep_atoms[step][j]), t);
    }
  }
  return sum;
}

double relaxed_time_pairing(const RelaxedControl& mu, const PsiIntegrand& h,
                            int substeps_per_step) {
  const double dt_sub = mu.grid().dt() / substeps_per_step;
  double sum = 0.0;
  for (int step = 0; step < mu.steps(); ++step) {
    for (int j = 0; j < substeps_per_step; ++j) {
      const double t = mu.grid().time(step) + (j + 0.5) * dt_sub;
      double avg = 0.0;
      for (int l = 0; l < mu.atoms(); ++l) {
        avg += mu.weights()(step, l) * psi_eval(h, mu.dictionary().atom(l), t);
      }
      sum += dt_sub * avg;
    }
  }
  return sum;
}

SpacetimeChatter::SpacetimeChatter(SpaceTimeYoungMeasure nu, int k)
    : nu_(std::move(nu)), k_(k), refined_grid_(nu_.grid().refined(k, k)) {
  if (k < 1) throw std::invalid_argument("chatter_spacetime: refinement >= 1");
  const Grid& g = nu_.grid();
  cell_seq_.resize(static_cast<std::size_t>(nu_.slices()) * g.interior_nodes());
  for (int kc = 0; kc < nu_.slices(); ++kc) {
    const auto& w = nu_.slice(kc);
    for (int i = 0; i < g.interior_nodes(); ++i) {
      cell_seq_[static_cast<std::size_t>(kc) * g.interior_nodes() + i] =
          quota_sequence(
              largest_remainder_counts(w.row(i).transpose(), k_));
    }
  }
}

int SpacetimeChatter::coarse_node_of(int refined_node) const {
  const Grid& g = nu_.grid();
  const int n0r = refined_grid_.interior_per_axis(0);
  const int i0r = refined_node % n0r;        // 0-based, coordinate (i0r+1)*dx0/k
  const int pos = i0r + 1;                   // 1-based fine index
  int coarse0 = (pos + k_ / 2) / k_;         // nearest coarse node, halves up
  coarse0 = std::clamp(coarse0, 1, g.interior_per_axis(0));
  int idx = coarse0 - 1;
  if (g.dim() == 2) {
    const int i1 = refined_node / n0r;       // axis 1 is not refined
    idx += i1 * g.interior_per_axis(0);
  }
  return idx;
}

int SpacetimeChatter::stripe_of_(int refined_node) const {
  const int n0r = refined_grid_.interior_per_axis(0);
  return (refined_node % n0r + 1) % k_;
}

int SpacetimeChatter::support_at(int global_substep, int refined_node) const {
  const Grid& g = nu_.grid();
  const int kc = global_substep / k_;
  const int j = global_substep % k_;
  const int node = coarse_node_of(refined_node);
  const auto& seq =
      cell_seq_[static_cast<std::size_t>(kc) * g.interior_nodes() + node];
  return seq[(stripe_of_(refined_node) + j) % k_];
}

ControlField SpacetimeChatter::field_at(int global_substep) const {
  const int m = static_cast<int>(nu_.support()[0].size());
  std::vector<double> values(
      static_cast<std::size_t>(refined_grid_.interior_nodes()) * m);
  for (int i = 0; i < refined_grid_.interior_nodes(); ++i) {
    const auto& z = nu_.support()[support_at(global_substep, i)];
    for (int c = 0; c < m; ++c) values[static_cast<std::size_t>(i) * m + c] = z[c];
  }
  return ControlField(refined_grid_, m, std::move(values));
}

SpacetimeChatter chatter_spacetime(const SpaceTimeYoungMeasure& nu, int k) {
  return SpacetimeChatter(nu, k);
}

double spacetime_chatter_pairing(const SpacetimeChatter& c,
                                 const PsiIntegrand& h) {
  const Grid& rg = c.refined_grid();
  const double dt_sub = rg.dt();
  double sum = 0.0;
  for (int j = 0; j < rg.nt(); ++j) {
    const double t = (j + 0.5) * dt_sub;
    for (int i = 0; i < rg.interior_nodes(); ++i) {
      const auto x = rg.node_coord(i);
      const auto& z = c.measure().support()[c.support_at(j, i)];
      sum += dt_sub * rg.quad_weight(i) *
             h.eval(t, {x.data(), static_cast<std::size_t>(rg.dim())},
                    {z.data(), z.size()});
    }
  }
  return sum;
}

double young_pairing_refined(const SpacetimeChatter& c, const PsiIntegrand& h) {
  const Grid& rg = c.refined_grid();
  const SpaceTimeYoungMeasure& nu = c.measure();
  const int k = c.refinement();
  const double dt_sub = rg.dt();
  double sum = 0.0;
  for (int j = 0; j < rg.nt(); ++j) {
    const double t = (j + 0.5) * dt_sub;
    const int kc = j / k;
    const auto& w = nu.slice(kc);
    for (int i = 0; i < rg.interior_nodes(); ++i) {
      const auto x = rg.node_coord(i);
      // Same refined sampling, cell weights instead of the stripe pattern.
      // Recover the coarse cell through one probe field lookup.
      double cell = 0.0;
      for (int s = 0; s < nu.support_size(); ++s) {
        const auto& z = nu.support()[s];
        cell += w(c.coarse_node_of(i), s) *
                h.eval(t, {x.data(), static_cast<std::size_t>(rg.dim())},
                       {z.data(), z.size()});
      }
      sum += dt_sub * rg.quad_weight(i) * cell;
    }
  }
  return sum;
}

}  // namespace relaxctrl
