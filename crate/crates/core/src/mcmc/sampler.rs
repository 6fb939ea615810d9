//! Metropolis-within-Gibbs updates for `(C, c*, alpha, sigma_x, sigma_w)`
//! and the missing cells of `X`.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::features::{compute_feature_matrix, mark_reachers, FeatureMatrix};
use crate::geometry::ProximityMatrix;
use crate::likelihood::{loglik_columns, GramCache, sample_missing, DataMatrix, NoiseParams};
use crate::mcmc::config::{GammaPrior, McmcConfig, OwnershipScan};
use crate::prior::{log_prior, new_dish, sample_prior, PriorState};
use crate::random;

/// Standard deviation of the log-normal hyperprior on each noise scale.
pub const NOISE_HYPERPRIOR_LOG_SD: f64 = 2.0;

/// Full sampler state. `z` and `log_lik` are caches of quantities derived
/// from the other fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub prior: PriorState,
    pub alpha: f64,
    pub noise: NoiseParams,
    /// `None` runs the chain under a flat likelihood.
    pub data: Option<DataMatrix>,
    pub z: FeatureMatrix,
    pub log_lik: f64,
    pub log_joint: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptanceCounts {
    pub ownership_proposed: u64,
    pub ownership_accepted: u64,
    pub noise_proposed: u64,
    pub noise_accepted: u64,
}

impl AcceptanceCounts {
    pub fn ownership_rate(&self) -> f64 {
        self.ownership_accepted as f64 / self.ownership_proposed.max(1) as f64
    }

    pub fn noise_rate(&self) -> f64 {
        self.noise_accepted as f64 / self.noise_proposed.max(1) as f64
    }
}

pub fn ln_gamma_density(x: f64, prior: &GammaPrior) -> f64 {
    prior.shape * prior.rate.ln() - ln_gamma(prior.shape) + (prior.shape - 1.0) * x.ln() - prior.rate * x
}

/// Log-normal(0, 2^2) density of a noise scale.
pub fn ln_noise_hyperprior(sigma: f64) -> f64 {
    let s2 = NOISE_HYPERPRIOR_LOG_SD * NOISE_HYPERPRIOR_LOG_SD;
    let l = sigma.ln();
    -l - 0.5 * (2.0 * std::f64::consts::PI * s2).ln() - l * l / (2.0 * s2)
}

/// Geometry plus schedule; the update operations are methods on it.
#[derive(Debug, Clone)]
pub struct Sampler {
    proximity: ProximityMatrix,
    config: McmcConfig,
}

impl Sampler {
    pub fn new(proximity: ProximityMatrix, config: McmcConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { proximity, config })
    }

    pub fn proximity(&self) -> &ProximityMatrix {
        &self.proximity
    }

    pub fn config(&self) -> &McmcConfig {
        &self.config
    }

    /// Draws `alpha` (unless configured), `c*` and `C` from the prior, and
    /// fills missing cells with their observed column means.
    pub fn initial_state<R: Rng + ?Sized>(&self, data: Option<DataMatrix>, rng: &mut R) -> Result<ChainState> {
        let n = self.proximity.n();
        let mut data = data;
        if let Some(d) = &mut data {
            if d.n() != n {
                return Err(Error::Dimension(format!(
                    "data has {} rows but distances cover {n} customers",
                    d.n()
                )));
            }
            fill_column_means(d);
        }
        let prior_alpha = &self.config.alpha_prior;
        let alpha = match self.config.initial_alpha {
            Some(a) => a,
            None => random::gamma(prior_alpha.shape, prior_alpha.rate, rng),
        };
        let prior = sample_prior(&self.proximity, alpha, rng)?;
        let z = compute_feature_matrix(&prior);
        let mut state = ChainState {
            prior,
            alpha,
            noise: self.config.initial_noise,
            data,
            z,
            log_lik: 0.0,
            log_joint: 0.0,
        };
        state.log_lik = self.log_likelihood(state.data.as_ref(), &state.z, &state.noise)?;
        self.refresh_log_joint(&mut state)?;
        Ok(state)
    }

    /// Builds a state from explicit parts and computes its caches.
    pub fn state_from_parts(
        &self,
        prior: PriorState,
        alpha: f64,
        noise: NoiseParams,
        data: Option<DataMatrix>,
    ) -> Result<ChainState> {
        let z = compute_feature_matrix(&prior);
        let log_lik = self.log_likelihood(data.as_ref(), &z, &noise)?;
        let mut state = ChainState {
            prior,
            alpha,
            noise,
            data,
            z,
            log_lik,
            log_joint: 0.0,
        };
        self.refresh_log_joint(&mut state)?;
        Ok(state)
    }

    pub fn log_likelihood(&self, data: Option<&DataMatrix>, z: &FeatureMatrix, noise: &NoiseParams) -> Result<f64> {
        match data {
            None => Ok(0.0),
            Some(d) => {
                let cols: Vec<&[bool]> = (0..z.n_cols())
                    .map(|c| z.column(c))
                    .filter(|c| c.iter().any(|&b| b))
                    .collect();
                loglik_columns(d.values(), d.values().norm_squared(), &cols, noise)
            }
        }
    }

    fn hyper_terms(&self, state: &ChainState) -> f64 {
        ln_gamma_density(state.alpha, &self.config.alpha_prior)
            + ln_noise_hyperprior(state.noise.sigma_x)
            + ln_noise_hyperprior(state.noise.sigma_w)
    }

    /// Recomputes `log_joint` from the cached likelihood.
    pub fn refresh_log_joint(&self, state: &mut ChainState) -> Result<()> {
        state.log_joint = log_prior(&state.prior, &self.proximity, state.alpha)? + state.log_lik + self.hyper_terms(state);
        Ok(())
    }

    /// `log P(X, C, c*, alpha, sigma)` evaluated from scratch.
    pub fn log_joint(&self, state: &ChainState) -> Result<f64> {
        let z = compute_feature_matrix(&state.prior);
        let ll = self.log_likelihood(state.data.as_ref(), &z, &state.noise)?;
        Ok(log_prior(&state.prior, &self.proximity, state.alpha)? + ll + self.hyper_terms(state))
    }

    /// `alpha | c* ~ Gamma(shape + sum lambda_i, rate + sum 1/h_i)`.
    pub fn alpha_conditional(&self, prior: &PriorState) -> GammaPrior {
        let total: usize = prior.lambda().iter().sum();
        GammaPrior {
            shape: self.config.alpha_prior.shape + total as f64,
            rate: self.config.alpha_prior.rate + self.proximity.inverse_h_sum(),
        }
    }

    pub fn gibbs_alpha<R: Rng + ?Sized>(&self, state: &mut ChainState, rng: &mut R) {
        let post = self.alpha_conditional(&state.prior);
        state.alpha = random::gamma(post.shape, post.rate, rng);
    }

    /// Gibbs update of the link `c_ik`.
    ///
    /// Only two feature columns are possible for dish `k`, depending on
    /// whether `i` ends up reaching the owner, so at most one new likelihood
    /// evaluation is needed: the current class reuses the cached value.
    pub fn gibbs_connection<R: Rng + ?Sized>(
        &self,
        state: &mut ChainState,
        i: usize,
        k: usize,
        rng: &mut R,
    ) -> Result<()> {
        let mut cache = state.data.as_ref().map(|d| GramCache::new(d.values(), &state.z));
        self.gibbs_connection_cached(state, cache.as_mut(), i, k, rng)
    }

    fn gibbs_connection_cached<R: Rng + ?Sized>(
        &self,
        state: &mut ChainState,
        mut cache: Option<&mut GramCache>,
        i: usize,
        k: usize,
        rng: &mut R,
    ) -> Result<()> {
        let n = state.prior.n();
        let owner = state.prior.owner(k);
        if i == owner {
            let j = self.proximity.sample_target(i, rng);
            state.prior.set_link(i, k, j);
            return Ok(());
        }
        let links = &state.prior.dishes()[k].links;
        let mut base = vec![false; n];
        mark_reachers(links, owner, &[i], &mut base);

        let row = self.proximity.row(i);
        let (mut mass_reach, mut mass_not) = (0.0, 0.0);
        for (j, &p) in row.iter().enumerate() {
            if base[j] {
                mass_reach += p;
            } else {
                mass_not += p;
            }
        }
        let current_reach = base[links[i]];
        let other_mass = if current_reach { mass_not } else { mass_reach };

        let mut other_column = None;
        let mut ll_other = state.log_lik;
        if let (true, Some(cache), Some(d)) = (other_mass > 0.0, cache.as_deref(), state.data.as_ref()) {
            let col = if current_reach {
                base.clone()
            } else {
                let mut via = vec![false; n];
                mark_reachers(links, i, &[i, owner], &mut via);
                base.iter().zip(&via).map(|(&b, &v)| b || v).collect()
            };
            ll_other = cache.loglik_swapped(d.values(), &state.z, k, &col, &state.noise)?;
            other_column = Some(col);
        }

        let (ll_reach, ll_not) = if current_reach {
            (state.log_lik, ll_other)
        } else {
            (ll_other, state.log_lik)
        };
        let top = ll_reach.max(ll_not);
        let w_reach = mass_reach * (ll_reach - top).exp();
        let w_not = mass_not * (ll_not - top).exp();
        let pick_reach = rng.random::<f64>() * (w_reach + w_not) < w_reach;

        let weights: Vec<f64> = row
            .iter()
            .zip(&base)
            .map(|(&p, &b)| if b == pick_reach { p } else { 0.0 })
            .collect();
        let j = random::categorical(&weights, rng);
        state.prior.set_link(i, k, j);

        if pick_reach != current_reach {
            let col = match other_column {
                Some(c) => c,
                None => {
                    let mut c = vec![false; n];
                    mark_reachers(&state.prior.dishes()[k].links, owner, &[], &mut c);
                    c
                }
            };
            if let (Some(cache), Some(d)) = (cache, state.data.as_ref()) {
                cache.set_column(d.values(), &state.z, k, &col);
            }
            state.z.column_mut(k).copy_from_slice(&col);
            state.log_lik = ll_other;
        }
        debug_assert!(n > 12 || state.z.column(k) == compute_feature_matrix(&state.prior).column(k));
        Ok(())
    }

    /// Every `c_ik` for `n = 1..N`, `i = 1..N`, `k` owned by `n`.
    pub fn gibbs_connections<R: Rng + ?Sized>(&self, state: &mut ChainState, rng: &mut R) -> Result<()> {
        let n = state.prior.n();
        let mut cache = state.data.as_ref().map(|d| GramCache::new(d.values(), &state.z));
        for owner in 0..n {
            for k in state.prior.owned_range(owner) {
                for i in 0..n {
                    self.gibbs_connection_cached(state, cache.as_mut(), i, k, rng)?;
                }
            }
        }
        Ok(())
    }

    /// Proposes fresh dish counts for every customer from the prior, adding
    /// prior-drawn dishes or deleting uniformly chosen ones, and accepts with
    /// the likelihood ratio. Returns whether the proposal was accepted.
    pub fn mh_ownership<R: Rng + ?Sized>(&self, state: &mut ChainState, rng: &mut R) -> Result<bool> {
        self.mh_ownership_block(state, 0..state.prior.n(), rng)
    }

    /// The ownership proposal restricted to `customers`; dish counts of
    /// everyone else are kept.
    pub fn mh_ownership_block<R: Rng + ?Sized>(
        &self,
        state: &mut ChainState,
        customers: Range<usize>,
        rng: &mut R,
    ) -> Result<bool> {
        let mut proposal = state.prior.clone();
        for i in customers {
            let owned = proposal.owned_range(i);
            let current = owned.len();
            let proposed = random::poisson(state.alpha / self.proximity.h()[i], rng) as usize;
            if proposed > current {
                for _ in current..proposed {
                    proposal.insert_dish(new_dish(&self.proximity, i, rng));
                }
            } else if proposed < current {
                let mut drop = rand::seq::index::sample(rng, current, current - proposed).into_vec();
                drop.sort_unstable_by(|a, b| b.cmp(a));
                for r in drop {
                    proposal.remove_dish(owned.start + r);
                }
            }
        }
        let z_new = compute_feature_matrix(&proposal);
        let ll_new = self.log_likelihood(state.data.as_ref(), &z_new, &state.noise)?;
        let accept = state.data.is_none() || rng.random::<f64>().ln() < ll_new - state.log_lik;
        if accept {
            state.prior = proposal;
            state.z = z_new;
            state.log_lik = ll_new;
        }
        Ok(accept)
    }

    /// Log-space random walk on `sigma_x` then `sigma_w`. Returns the number
    /// of accepted moves.
    pub fn mh_noise<R: Rng + ?Sized>(&self, state: &mut ChainState, rng: &mut R) -> Result<usize> {
        let scale = self.config.noise_proposal_scale;
        if scale == 0.0 {
            return Ok(0);
        }
        let mut accepted = 0;
        for which in 0..2 {
            let mut prop = state.noise;
            let current = if which == 0 { state.noise.sigma_x } else { state.noise.sigma_w };
            let step = current * (scale * random::standard_normal(rng)).exp();
            if which == 0 {
                prop.sigma_x = step;
            } else {
                prop.sigma_w = step;
            }
            if prop.validate().is_err() {
                continue;
            }
            let ll_new = self.log_likelihood(state.data.as_ref(), &state.z, &prop)?;
            // proposal is symmetric in log sigma, hence the sigma'/sigma Jacobian
            let log_ratio = ll_new - state.log_lik + ln_noise_hyperprior(step) - ln_noise_hyperprior(current)
                + step.ln()
                - current.ln();
            if rng.random::<f64>().ln() < log_ratio {
                state.noise = prop;
                state.log_lik = ll_new;
                accepted += 1;
            }
        }
        Ok(accepted)
    }

    /// Redraws masked cells and refreshes the cached likelihood.
    pub fn impute<R: Rng + ?Sized>(&self, state: &mut ChainState, rng: &mut R) -> Result<()> {
        let Some(d) = &state.data else {
            return Ok(());
        };
        if !d.has_missing() {
            return Ok(());
        }
        let next = sample_missing(d, &state.z, &state.noise, rng)?;
        state.log_lik = self.log_likelihood(Some(&next), &state.z, &state.noise)?;
        state.data = Some(next);
        Ok(())
    }

    /// One systematic scan: alpha, connections, ownership, noise, missing
    /// data.
    pub fn sweep<R: Rng + ?Sized>(
        &self,
        state: &mut ChainState,
        rng: &mut R,
        counts: &mut AcceptanceCounts,
    ) -> Result<()> {
        let flags = self.config.update;
        if flags.alpha {
            self.gibbs_alpha(state, rng);
        }
        self.gibbs_connections(state, rng)?;
        match self.config.ownership {
            OwnershipScan::Joint => {
                counts.ownership_proposed += 1;
                counts.ownership_accepted += u64::from(self.mh_ownership(state, rng)?);
            }
            OwnershipScan::PerCustomer => {
                for i in 0..state.prior.n() {
                    counts.ownership_proposed += 1;
                    counts.ownership_accepted += u64::from(self.mh_ownership_block(state, i..i + 1, rng)?);
                }
            }
        }
        if flags.noise && self.config.noise_proposal_scale > 0.0 {
            counts.noise_proposed += 2;
            counts.noise_accepted += self.mh_noise(state, rng)? as u64;
        }
        if flags.missing {
            self.impute(state, rng)?;
        }
        self.refresh_log_joint(state)?;
        #[cfg(debug_assertions)]
        {
            let fresh = self.log_joint(state)?;
            let tol = 1e-8 * (1.0 + fresh.abs());
            debug_assert!(
                (fresh - state.log_joint).abs() <= tol,
                "cached log joint {} drifted from {}",
                state.log_joint,
                fresh
            );
        }
        Ok(())
    }
}

fn fill_column_means(d: &mut DataMatrix) {
    for j in 0..d.m() {
        let obs: Vec<f64> = (0..d.n())
            .filter(|&i| !d.is_missing(i, j))
            .map(|i| d.values()[(i, j)])
            .collect();
        let mean = if obs.is_empty() {
            0.0
        } else {
            obs.iter().sum::<f64>() / obs.len() as f64
        };
        for i in 0..d.n() {
            if d.is_missing(i, j) {
                d.set(i, j, mean);
            }
        }
    }
}
