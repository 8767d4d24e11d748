#include "coxkit/mcmc_spatiotemporal.hpp"

#include <string>

#include "coxkit/errors.hpp"

namespace coxkit {

void StModel::validate() const {
  if (region.dim() == 0) throw InputError("model region is not set");
  if (n_times < 1) throw InputError("spatio-temporal model needs at least one time");
  if (data.dim != region.dim()) throw InputError("data dimension differs from the region dimension");
  data.check_inside(region);
  for (std::size_t i = 0; i < data.events.size(); ++i) {
    if (data.events[i].t < 0 || data.events[i].t >= n_times) {
      throw InputError("event " + std::to_string(i + 1) + " has time index outside 0.." + std::to_string(n_times - 1));
    }
  }
  const auto p = design.n_processes();
  if (init_prior.size() != p || dist_prior.size() != p || dgp.processes.size() != p) {
    throw InputError("one dynamic GP specification per design term is required");
  }
  for (std::size_t j = 0; j < p; ++j) {
    init_prior[j].validate("gp[" + std::to_string(j) + "].init");
    if (!dgp.processes[j].deterministic) {
      dist_prior[j].validate("gp[" + std::to_string(j) + "].disturbance");
      if (dist_prior[j].mu.free || dist_prior[j].mu.value != 0.0) {
        throw InputError("gp[" + std::to_string(j) + "].disturbance.mu must be fixed at 0");
      }
    }
  }
  for (std::size_t j = 0; j < p; ++j) (void)dgp.alpha(j);
  lambda.validate();
}

StData StData::split(const StModel& model) {
  StData d;
  d.sites.resize(static_cast<std::size_t>(model.n_times));
  d.covariates.resize(static_cast<std::size_t>(model.n_times));
  for (const auto& e : model.data.events) {
    d.sites[static_cast<std::size_t>(e.t)].push_back(Site{e.t, e.x});
    d.covariates[static_cast<std::size_t>(e.t)].push_back(e.covariates);
  }
  return d;
}

std::vector<DgpCovariance> st_covariances(const StModel& model, const std::vector<DgpProcess>& theta) {
  std::vector<DgpCovariance> out;
  out.reserve(theta.size());
  for (std::size_t j = 0; j < theta.size(); ++j) out.emplace_back(theta[j], model.dgp.alpha(j), model.n_times - 1);
  return out;
}

namespace {

std::vector<const SiteCovariance*> pointers(const std::vector<DgpCovariance>& covs) {
  std::vector<const SiteCovariance*> out;
  for (const auto& c : covs) out.push_back(&c);
  return out;
}

std::vector<double> cache_key(const StModel& model, const std::vector<DgpProcess>& theta) {
  auto key = theta_key(flatten_theta(theta));
  for (std::size_t j = 0; j < theta.size(); ++j) {
    key.push_back(model.dgp.alpha(j));
    key.push_back(theta[j].deterministic ? 1.0 : 0.0);
  }
  return key;
}

}  // namespace

StState initial_state(const StModel& model, const StData& data) {
  StState s;
  const auto p = static_cast<Eigen::Index>(model.n_processes());
  for (std::size_t j = 0; j < model.n_processes(); ++j) {
    DgpProcess proc;
    proc.init = model.init_prior[j].initial();
    proc.deterministic = model.dgp.processes[j].deterministic;
    proc.disturbance = proc.deterministic ? model.dgp.processes[j].disturbance : model.dist_prior[j].initial();
    s.theta.push_back(proc);
  }
  const auto covs = st_covariances(model, s.theta);
  s.slices.resize(static_cast<std::size_t>(model.n_times));
  for (int t = 0; t < model.n_times; ++t) {
    auto& sl = s.slices[static_cast<std::size_t>(t)];
    const auto& sites = data.sites[static_cast<std::size_t>(t)];
    sl.k = sites.size();
    sl.beta_n.resize(static_cast<Eigen::Index>(sites.size()), p);
    for (Eigen::Index j = 0; j < p; ++j) sl.beta_n.col(j) = mean_vector(covs[static_cast<std::size_t>(j)], sites);
    sl.beta_m.resize(0, p);
  }
  const double l0 = model.lambda.prior_mean();
  s.lambda.assign(model.lambda_mode == LambdaMode::Common ? 1 : static_cast<std::size_t>(model.n_times), l0);
  return s;
}

StStack stack_state(const StState& state, const StData& data) {
  StStack st;
  Eigen::Index total = 0;
  for (const auto& sl : state.slices) total += sl.beta_n.rows() + sl.beta_m.rows();
  const auto p = state.slices.empty() ? 0 : state.slices.front().beta_n.cols();
  st.values.resize(total, p);
  Eigen::Index row = 0;
  for (std::size_t t = 0; t < state.slices.size(); ++t) {
    const auto& sl = state.slices[t];
    st.starts.push_back(static_cast<std::size_t>(row));
    for (const auto& s : data.sites[t]) st.sites.push_back(s);
    for (const auto& x : sl.thinned) st.sites.push_back(Site{static_cast<int>(t), x});
    st.values.middleRows(row, sl.beta_n.rows()) = sl.beta_n;
    row += sl.beta_n.rows();
    st.values.middleRows(row, sl.beta_m.rows()) = sl.beta_m;
    row += sl.beta_m.rows();
  }
  return st;
}

void sample_thinned_all_times(StState& state, const StModel& model, const StData& data,
                              const SamplerSettings& settings, Rng& rng, ObservedFactorCache* cache) {
  const auto covs = st_covariances(model, state.theta);
  const auto ptrs = pointers(covs);
  const auto p = static_cast<Eigen::Index>(ptrs.size());

  std::vector<Site> obs;
  Eigen::Index n_obs = 0;
  for (const auto& sl : state.slices) n_obs += sl.beta_n.rows();
  Eigen::MatrixXd obs_values(n_obs, p);
  Eigen::Index row = 0;
  for (std::size_t t = 0; t < state.slices.size(); ++t) {
    obs.insert(obs.end(), data.sites[t].begin(), data.sites[t].end());
    obs_values.middleRows(row, state.slices[t].beta_n.rows()) = state.slices[t].beta_n;
    row += state.slices[t].beta_n.rows();
  }
  std::vector<IncrementalFactor> base;
  if (cache != nullptr) {
    base = cache->get(ptrs, obs, obs_values, cache_key(model, state.theta));
  } else {
    for (Eigen::Index j = 0; j < p; ++j) base.emplace_back(*ptrs[static_cast<std::size_t>(j)], obs, obs_values.col(j));
  }

  // Covariance blocks among the thinned sets, per process: cross[j][u] is
  // k(observed, thinned at u) and gram[j][u][w] is k(thinned at u, thinned at w).
  // Only the blocks of the slice just redrawn are recomputed.
  const std::size_t n_slices = state.slices.size();
  std::vector<std::vector<Site>> thin(n_slices);
  for (std::size_t u = 0; u < n_slices; ++u) thin[u] = as_sites(state.slices[u].thinned, static_cast<int>(u));
  const auto pu = static_cast<std::size_t>(p);
  std::vector<std::vector<Eigen::MatrixXd>> cross(pu, std::vector<Eigen::MatrixXd>(n_slices));
  std::vector<std::vector<std::vector<Eigen::MatrixXd>>> gram(
      pu, std::vector<std::vector<Eigen::MatrixXd>>(n_slices, std::vector<Eigen::MatrixXd>(n_slices)));
  auto refresh = [&](std::size_t u) {
    for (std::size_t j = 0; j < pu; ++j) {
      cross[j][u] = cross_cov(*ptrs[j], obs, thin[u]);
      gram[j][u][u] = cov_matrix(*ptrs[j], thin[u]);
      for (std::size_t w = 0; w < n_slices; ++w) {
        if (w == u) continue;
        gram[j][w][u] = cross_cov(*ptrs[j], thin[w], thin[u]);
        gram[j][u][w] = gram[j][w][u].transpose();
      }
    }
  };
  for (std::size_t u = 0; u < n_slices; ++u) {
    for (std::size_t j = 0; j < pu; ++j) {
      cross[j][u] = cross_cov(*ptrs[j], obs, thin[u]);
      gram[j][u][u] = cov_matrix(*ptrs[j], thin[u]);
      for (std::size_t w = 0; w < u; ++w) {
        gram[j][w][u] = cross_cov(*ptrs[j], thin[w], thin[u]);
        gram[j][u][w] = gram[j][w][u].transpose();
      }
    }
  }

  for (int t = 0; t < model.n_times; ++t) {
    const auto ut = static_cast<std::size_t>(t);
    const auto n_t = data.sites[ut].size();
    std::vector<IncrementalFactor> factors = base;
    // Thinned events of every time, this one included, join the conditioning set.
    std::vector<Site> all_thin;
    std::vector<Eigen::Index> offset;
    Eigen::Index m = 0;
    for (std::size_t u = 0; u < n_slices; ++u) {
      offset.push_back(m);
      m += static_cast<Eigen::Index>(thin[u].size());
      all_thin.insert(all_thin.end(), thin[u].begin(), thin[u].end());
    }
    Eigen::MatrixXd thin_values(m, p);
    for (std::size_t u = 0; u < n_slices; ++u) {
      if (state.slices[u].beta_m.rows() > 0) {
        thin_values.middleRows(offset[u], state.slices[u].beta_m.rows()) = state.slices[u].beta_m;
      }
    }
    for (std::size_t j = 0; j < pu; ++j) {
      Eigen::MatrixXd c(n_obs, m);
      Eigen::MatrixXd g(m, m);
      for (std::size_t u = 0; u < n_slices; ++u) {
        const auto mu = static_cast<Eigen::Index>(thin[u].size());
        c.middleCols(offset[u], mu) = cross[j][u];
        for (std::size_t w = 0; w < n_slices; ++w) {
          g.block(offset[u], offset[w], mu, static_cast<Eigen::Index>(thin[w].size())) = gram[j][u][w];
        }
      }
      factors[j].extend_block(*ptrs[j], all_thin, thin_values.col(static_cast<Eigen::Index>(j)), std::move(c),
                              std::move(g));
    }
    auto draw = draw_thinned_events(state.lambda_at(t), t, model.region, model.design, ptrs, factors, settings, rng);
    auto& sl = state.slices[ut];
    sl.k = n_t + draw.locations.size();
    sl.thinned = std::move(draw.locations);
    sl.beta_m = std::move(draw.values);
    if (t + 1 < model.n_times) {
      thin[ut] = as_sites(sl.thinned, t);
      refresh(ut);
    }
  }
}

void sample_gp_all_times(StState& state, const StModel& model, const StData& data, const SamplerSettings& settings,
                         Rng& rng) {
  const auto covs = st_covariances(model, state.theta);
  const auto p = covs.size();

  auto update_slice = [&](std::size_t t, const Eigen::MatrixXd& beta) {
    auto& sl = state.slices[t];
    const auto n = sl.beta_n.rows();
    sl.beta_n = beta.topRows(n);
    sl.beta_m = beta.bottomRows(beta.rows() - n);
  };
  auto current = [&](std::size_t t) {
    const auto& sl = state.slices[t];
    Eigen::MatrixXd v(sl.beta_n.rows() + sl.beta_m.rows(), static_cast<Eigen::Index>(p));
    if (sl.beta_n.rows() > 0) v.topRows(sl.beta_n.rows()) = sl.beta_n;
    if (sl.beta_m.rows() > 0) v.bottomRows(sl.beta_m.rows()) = sl.beta_m;
    return v;
  };
  auto rows_for = [&](std::size_t t) {
    return signed_design(model.design, data.sites[t], data.covariates[t],
                         as_sites(state.slices[t].thinned, static_cast<int>(t)));
  };

  if (model.n_times == 1) {
    // Nothing else to condition on: the slice law is the prior.
    std::vector<Site> sites = data.sites[0];
    for (const auto& x : state.slices[0].thinned) sites.push_back(Site{0, x});
    std::vector<GaussianLaw> laws;
    for (const auto& c : covs) laws.push_back(GaussianLaw{mean_vector(c, sites), cov_matrix(c, sites), c.scale()});
    update_slice(0, draw_gp_slice(laws, rows_for(0), current(0), settings.sn_sweeps, rng));
    return;
  }

  const StStack stack = stack_state(state, data);
  std::vector<BlockConditioner> cond;
  cond.reserve(p);
  for (std::size_t j = 0; j < p; ++j) {
    cond.emplace_back(covs[j], stack.sites, stack.values.col(static_cast<Eigen::Index>(j)), stack.starts);
  }
  for (std::size_t t = 0; t < state.slices.size(); ++t) {
    if (cond.front().block_size(t) == 0) continue;
    std::vector<GaussianLaw> laws;
    for (auto& c : cond) laws.push_back(c.conditional(t));
    const Eigen::MatrixXd beta = draw_gp_slice(laws, rows_for(t), current(t), settings.sn_sweeps, rng);
    for (std::size_t j = 0; j < p; ++j) cond[j].set_block(t, beta.col(static_cast<Eigen::Index>(j)));
    update_slice(t, beta);
  }
}

std::vector<GpHyper> flatten_theta(const std::vector<DgpProcess>& theta) {
  std::vector<GpHyper> flat;
  for (const auto& p : theta) flat.push_back(p.init);
  for (const auto& p : theta) flat.push_back(p.disturbance);
  return flat;
}

void unflatten_theta(const std::vector<GpHyper>& flat, std::vector<DgpProcess>& theta) {
  if (flat.size() != 2 * theta.size()) throw InputError("hyperparameter list has wrong length");
  for (std::size_t j = 0; j < theta.size(); ++j) {
    theta[j].init = flat[j];
    theta[j].disturbance = flat[theta.size() + j];
  }
}

ThetaLayout st_theta_layout(const StModel& model) {
  std::vector<HyperPrior> priors;
  std::vector<std::string> suffixes;
  const auto p = model.n_processes();
  for (std::size_t j = 0; j < p; ++j) {
    priors.push_back(model.init_prior[j]);
    suffixes.push_back("_" + std::to_string(j));
  }
  for (std::size_t j = 0; j < p; ++j) {
    priors.push_back(model.dgp.processes[j].deterministic ? HyperPrior::fixed(model.dgp.processes[j].disturbance)
                                                          : model.dist_prior[j]);
    suffixes.push_back("_w_" + std::to_string(j));
  }
  return ThetaLayout(priors, suffixes);
}

bool sample_theta(StState& state, const StModel& model, const StData& data, const ThetaLayout& layout,
                  AdaptiveMetropolis& adapt, Rng& rng) {
  if (layout.dim() == 0) return false;
  const StStack stack = stack_state(state, data);
  const auto flat0 = flatten_theta(state.theta);
  auto target = [&](const Eigen::VectorXd& z) {
    double lp = layout.log_prior(z);
    if (!std::isfinite(lp)) return lp;
    auto flat = flat0;
    layout.unpack(z, flat);
    auto theta = state.theta;
    unflatten_theta(flat, theta);
    const auto covs = st_covariances(model, theta);
    for (std::size_t j = 0; j < covs.size(); ++j) {
      lp += gp_log_density(covs[j], stack.sites, stack.values.col(static_cast<Eigen::Index>(j)));
    }
    return lp;
  };
  Eigen::VectorXd z = layout.pack(flat0);
  const bool accepted = adapt.step(z, target, rng);
  auto flat = flat0;
  layout.unpack(z, flat);
  unflatten_theta(flat, state.theta);
  return accepted;
}

void sample_lambda_all(StState& state, const StModel& model, Rng& rng) {
  const double measure = model.region.measure();
  if (model.lambda_mode == LambdaMode::Common) {
    double total = 0.0;
    for (const auto& sl : state.slices) total += static_cast<double>(sl.k);
    state.lambda.assign(1, model.lambda.draw_posterior(total, static_cast<double>(model.n_times) * measure, rng));
    return;
  }
  state.lambda.resize(state.slices.size());
  for (std::size_t t = 0; t < state.slices.size(); ++t) {
    state.lambda[t] = model.lambda.draw_posterior(static_cast<double>(state.slices[t].k), measure, rng);
  }
}

Eigen::MatrixXd draw_beta_at(const StState& state, const StModel& model, const StData& data,
                             std::span<const Site> sites, Rng& rng) {
  const auto covs = st_covariances(model, state.theta);
  const StStack stack = stack_state(state, data);
  std::vector<GaussianLaw> laws;
  for (std::size_t j = 0; j < covs.size(); ++j) {
    laws.push_back(conditional_law(covs[j], stack.sites, stack.values.col(static_cast<Eigen::Index>(j)), sites));
  }
  return draw_grid_beta(laws, rng);
}

void augment_grid(const StState& state, const StModel& model, const StData& data, IntensityGrid& grid, Rng& rng) {
  if (grid.size() == 0) return;
  const Eigen::MatrixXd beta = draw_beta_at(state, model, data, grid.sites(), rng);
  Eigen::VectorXd lam(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const auto& s = grid.sites()[i];
    lam(ii) = state.lambda_at(s.t) * norm_cdf(model.design.row(s).dot(beta.row(ii).transpose()));
  }
  grid.add(lam, beta);
}

// ---------------------------------------------------------------------------

PredictiveModel PredictiveModel::from(const StModel& model) {
  return PredictiveModel{model.region, model.design, model.dgp, model.lambda, model.lambda_mode, model.n_times};
}

PredictiveModel PredictiveModel::from(const SpatialModel& model) {
  PredictiveModel pm;
  pm.region = model.region;
  pm.design = model.design;
  pm.dgp.processes.resize(model.design.n_processes());
  for (auto& p : pm.dgp.processes) p.deterministic = true;
  pm.lambda = model.lambda;
  pm.lambda_mode = LambdaMode::Common;
  pm.first_time = 1;
  return pm;
}

SnapshotField::SnapshotField(const PredictiveModel& model, const Snapshot& snapshot) {
  const auto p = model.design.n_processes();
  if (snapshot.init.size() != p) throw InputError("snapshot has the wrong number of processes");
  if (static_cast<std::size_t>(snapshot.values.cols()) != p ||
      static_cast<std::size_t>(snapshot.values.rows()) != snapshot.sites.size()) {
    throw InputError("snapshot values do not match its sites");
  }
  covs_.reserve(p);
  int last = 0;
  for (const auto& s : snapshot.sites) last = std::max(last, s.t);
  for (std::size_t j = 0; j < p; ++j) {
    DgpProcess proc = model.dgp.processes.at(j);
    proc.init = snapshot.init[j];
    if (j < snapshot.disturbance.size()) proc.disturbance = snapshot.disturbance[j];
    covs_.emplace_back(proc, model.dgp.alpha(j), last + 1);
  }
  for (std::size_t j = 0; j < p; ++j) {
    factors_.emplace_back(covs_[j], snapshot.sites, snapshot.values.col(static_cast<Eigen::Index>(j)));
  }
}

Eigen::MatrixXd SnapshotField::draw(const std::vector<Site>& sites, Rng& rng) {
  const auto q = static_cast<Eigen::Index>(sites.size());
  Eigen::MatrixXd beta(q, static_cast<Eigen::Index>(covs_.size()));
  if (q == 0) return beta;
  for (std::size_t j = 0; j < covs_.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    GaussianLaw law{mean_vector(covs_[j], sites), cov_matrix(covs_[j], sites), covs_[j].scale()};
    if (factors_[j].size() > 0) {
      const Eigen::MatrixXd v = factors_[j].solve_cross(covs_[j], sites);
      law.mean.noalias() += v.transpose() * factors_[j].whitened();
      law.cov.noalias() -= v.transpose() * v;
      law.cov = 0.5 * (law.cov + law.cov.transpose()).eval();
    }
    beta.col(jj) = draw_gaussian(law, rng);
    factors_[j].extend_block(covs_[j], sites, beta.col(jj));
  }
  return beta;
}

std::vector<PredictionDraw> predict_future(const PredictiveModel& model, const Snapshot& snapshot,
                                           const PredictionSpec& spec, Rng& rng) {
  std::vector<PredictionDraw> out;
  if (spec.horizon <= 0) return out;
  SnapshotField field(model, snapshot);
  std::vector<std::vector<Region>> strata;
  for (const auto& r : spec.regions) {
    if (!model.region.contains(r)) throw InputError("prediction region must lie inside the model region");
    strata.push_back(equal_strata(r, spec.n_strata));
  }

  for (int k = 0; k < spec.horizon; ++k) {
    PredictionDraw d;
    d.t = model.first_time + k;
    d.lambda = model.lambda_mode == LambdaMode::Common ? snapshot.lambda.at(0) : model.lambda.draw_prior(rng);
    const auto n_cand = draw_poisson(d.lambda * model.region.measure(), rng);
    std::vector<Site> query;
    for (std::uint64_t i = 0; i < n_cand; ++i) query.push_back(Site{d.t, model.region.sample_uniform(rng)});
    for (const auto& x : spec.grid) query.push_back(Site{d.t, x});
    for (const auto& st : strata) {
      for (const auto& cell : st) query.push_back(Site{d.t, cell.sample_uniform(rng)});
    }
    const Eigen::MatrixXd beta = field.draw(query, rng);
    auto intensity = [&](Eigen::Index i) {
      return norm_cdf(model.design.row(query[static_cast<std::size_t>(i)]).dot(beta.row(i).transpose()));
    };
    Eigen::Index i = 0;
    for (; i < static_cast<Eigen::Index>(n_cand); ++i) {
      if (draw_uniform(rng) < intensity(i)) d.events.push_back(query[static_cast<std::size_t>(i)].x);
    }
    const auto g = static_cast<Eigen::Index>(spec.grid.size());
    d.grid_lambda.resize(g);
    for (Eigen::Index a = 0; a < g; ++a, ++i) d.grid_lambda(a) = d.lambda * intensity(i);
    d.grid_beta = beta.middleRows(static_cast<Eigen::Index>(n_cand), g);
    for (std::size_t r = 0; r < strata.size(); ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < strata[r].size(); ++c, ++i) acc += d.lambda * intensity(i);
      d.integrals.push_back(spec.regions[r].measure() * acc / static_cast<double>(strata[r].size()));
    }
    out.push_back(std::move(d));
  }
  return out;
}

PredictiveSummary::PredictiveSummary(int first, const PredictionSpec& spec, std::size_t n_processes)
    : first_time(first) {
  const auto h = static_cast<std::size_t>(std::max(spec.horizon, 0));
  counts.resize(h);
  integrals.assign(h, std::vector<IntegralAccumulator>(spec.regions.size()));
  for (std::size_t k = 0; k < h; ++k) {
    grids.emplace_back(as_sites(spec.grid, first + static_cast<int>(k)), n_processes, false);
  }
}

void PredictiveSummary::add(const std::vector<PredictionDraw>& draws) {
  if (draws.size() != counts.size()) throw InputError("prediction draw has the wrong horizon");
  for (std::size_t k = 0; k < draws.size(); ++k) {
    counts[k].push_back(draws[k].events.size());
    if (grids[k].size() > 0) grids[k].add(draws[k].grid_lambda, draws[k].grid_beta);
    for (std::size_t r = 0; r < draws[k].integrals.size(); ++r) integrals[k][r].add(draws[k].integrals[r]);
  }
}

double PredictiveSummary::mean_count(std::size_t k) const {
  const auto& c = counts.at(k);
  if (c.empty()) return 0.0;
  double s = 0.0;
  for (auto v : c) s += static_cast<double>(v);
  return s / static_cast<double>(c.size());
}

// ---------------------------------------------------------------------------

namespace {

Snapshot make_snapshot(const StState& state, const StData& data, std::size_t iteration) {
  const StStack stack = stack_state(state, data);
  Snapshot snap;
  snap.iteration = iteration;
  snap.lambda = state.lambda;
  snap.sites = stack.sites;
  snap.values = stack.values;
  for (const auto& p : state.theta) {
    snap.init.push_back(p.init);
    snap.disturbance.push_back(p.disturbance);
  }
  return snap;
}

}  // namespace

StChainOutput run_st_gibbs(const StModel& model, const ChainConfig& config,
                           const std::optional<PredictionSpec>& prediction, StState* final_state) {
  model.validate();
  config.validate();
  for (const auto& s : config.grid) {
    if (s.t < 0 || s.t >= model.n_times) throw InputError("grid time index outside the observed times");
  }
  const StData data = StData::split(model);
  Rng rng(config.seed);
  StState state = initial_state(model, data);
  const ThetaLayout layout = st_theta_layout(model);
  AdaptiveMetropolis adapt(layout.dim());
  ObservedFactorCache cache;
  const PredictiveModel pmodel = PredictiveModel::from(model);

  StChainOutput out;
  out.columns = {"iter"};
  if (model.lambda_mode == LambdaMode::Common) {
    out.columns.push_back("lambda_star");
  } else {
    for (int t = 0; t < model.n_times; ++t) out.columns.push_back("lambda_star_" + std::to_string(t));
  }
  for (const auto& name : layout.names()) out.columns.push_back(name);
  for (int t = 0; t < model.n_times; ++t) out.columns.push_back("K_" + std::to_string(t));
  out.grid = IntensityGrid(config.grid, model.n_processes(), config.keep_grid_trace);
  if (prediction) out.prediction = PredictiveSummary(pmodel.first_time, *prediction, model.n_processes());

  for (std::size_t it = 0; it < config.n_iter; ++it) {
    try {
      sample_thinned_all_times(state, model, data, config.settings, rng, &cache);
      for (const auto& sl : state.slices) out.thinned_accepted += sl.thinned.size();
      sample_gp_all_times(state, model, data, config.settings, rng);
      sample_theta(state, model, data, layout, adapt, rng);
      sample_lambda_all(state, model, rng);
      state.iteration = it + 1;

      std::vector<double> row{static_cast<double>(it + 1)};
      for (double l : state.lambda) row.push_back(l);
      for (double v : layout.values(flatten_theta(state.theta))) row.push_back(v);
      for (const auto& sl : state.slices) row.push_back(static_cast<double>(sl.k));
      out.trace.push_back(std::move(row));

      if (config.retained(it)) {
        augment_grid(state, model, data, out.grid, rng);
        if (config.keep_snapshots || prediction) {
          Snapshot snap = make_snapshot(state, data, it + 1);
          if (prediction) out.prediction->add(predict_future(pmodel, snap, *prediction, rng));
          if (config.keep_snapshots) out.snapshots.push_back(std::move(snap));
        }
      }
    } catch (const NumericalError& e) {
      throw NumericalError("iteration " + std::to_string(it + 1) + ": " + e.what());
    }
  }
  out.theta_acceptance = adapt.acceptance_rate();
  if (final_state != nullptr) *final_state = state;
  return out;
}

}  // namespace coxkit
