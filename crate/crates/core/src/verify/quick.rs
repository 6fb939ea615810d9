use crate::error::Result;
use crate::features::{compute_feature_matrix, mark_reachers};
use crate::geometry::{DecayFunction, DistanceMatrix, ProximityMatrix};
use crate::prior::{log_prior, permute_state, sample_prior};
use crate::random::seeded;
use crate::theory::{
    ddibp_limit_fractions, ddibp_sharing_rates, dhbp_limit_fractions, reach_probs_exact, sharing_pmf_sweep,
    SweepModel,
};
use crate::verify::{likelihood_oracle, CheckResult, Report};

const PERMUTATIONS_3: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Reachability probabilities by brute force over all `n^n` link vectors
/// with the reverse search used to build `Z`.
fn brute_force_single(a: &ProximityMatrix) -> Vec<Vec<f64>> {
    let n = a.n();
    let mut p = vec![vec![0.0; n]; n];
    let mut links = vec![0; n];
    let mut out = vec![false; n];
    for code in 0..n.pow(n as u32) {
        let mut rem = code;
        let mut w = 1.0;
        for (m, l) in links.iter_mut().enumerate() {
            *l = rem % n;
            rem /= n;
            w *= a.a(m, *l);
        }
        for t in 0..n {
            mark_reachers(&links, t, &[], &mut out);
            for i in 0..n {
                if out[i] {
                    p[i][t] += w;
                }
            }
        }
    }
    p
}

/// Exact checks on instances with at most three customers.
pub fn quick_checks(seed: u64, perturbation: f64) -> Result<Report> {
    let mut report = Report::default();
    let scale = 1.0 + perturbation;

    let two = ProximityMatrix::build(
        &DistanceMatrix::sequential_index(2),
        &DecayFunction::Exponential { beta: 0.7 },
    )?;
    let p = reach_probs_exact(&two)?;
    report.extend([CheckResult::at_most(
        "quick.reach_two_customers",
        (p.p_single[1][0] - two.a(1, 0)).abs(),
        1e-14,
    )]);

    let dense = ProximityMatrix::build(
        &DistanceMatrix::absolute_difference(&[0.0, 0.6, 1.9])?,
        &DecayFunction::Exponential { beta: 0.9 },
    )?;
    let exact = reach_probs_exact(&dense)?;
    let brute = brute_force_single(&dense);
    let gap = (0..3)
        .flat_map(|i| (0..3).map(move |m| (i, m)))
        .map(|(i, m)| (exact.p_single[i][m] - brute[i][m]).abs())
        .fold(0.0, f64::max);
    report.extend([CheckResult::at_most("quick.reach_exact_vs_brute_force", gap, 1e-12)]);

    let ibp = ProximityMatrix::build(&DistanceMatrix::sequential_index(3), &DecayFunction::Constant)?;
    let probs = reach_probs_exact(&ibp)?;
    let alpha = 2.0;
    let rates = ddibp_sharing_rates(&ibp, alpha * scale, &probs);
    let mut rate_gap: f64 = 0.0;
    for i in 0..3 {
        rate_gap = rate_gap.max((rates.rate_i[i] - alpha).abs());
        for j in 0..3 {
            if i != j {
                rate_gap = rate_gap.max((rates.rate_ij[i][j] - alpha / 2.0).abs());
            }
        }
    }
    report.extend([CheckResult::at_most("quick.ibp_rates", rate_gap, 1e-12)]);
    let lim = ddibp_limit_fractions(&ibp, &probs);
    let lim_gap = (0..3)
        .flat_map(|i| (0..3).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| (lim[i][j] - 0.5).abs())
        .fold(0.0, f64::max);
    report.extend([CheckResult::at_most("quick.ibp_limit_fraction", lim_gap, 1e-12)]);

    let id = ProximityMatrix::identity(3);
    let id_rates = ddibp_sharing_rates(&id, alpha * scale, &reach_probs_exact(&id)?);
    let id_gap = (0..3)
        .map(|i| {
            let cross: f64 = (0..3).filter(|&j| j != i).map(|j| id_rates.rate_ij[i][j].abs()).sum();
            (id_rates.rate_i[i] - alpha).abs() + cross
        })
        .fold(0.0, f64::max);
    report.extend([CheckResult::at_most("quick.identity_rates", id_gap, 1e-12)]);

    let (same, diff) = dhbp_limit_fractions(10.0, 1.0)?;
    report.extend([CheckResult::at_most(
        "quick.dhbp_limit_values",
        (same - 6.0 / 11.0).abs().max((diff - 1.0 / 11.0).abs()),
        1e-12,
    )]);

    let grid = [0.0, 0.25, 0.5, 1.0, 2.0];
    let table = sharing_pmf_sweep(&SweepModel::Ddibp, &grid, 15.0, 0, seed)?;
    let mass_gap = table
        .pmf
        .iter()
        .map(|row| (row.iter().sum::<f64>() - 1.0).abs())
        .fold((1.0 - table.pmf[0][0]).abs(), f64::max);
    let mean_gap = table.mean_r.iter().map(|m| (m - 15.0).abs()).fold(0.0, f64::max);
    report.extend([
        CheckResult::at_most("quick.pmf_sweep_normalized", mass_gap, 1e-9),
        CheckResult::at_most("quick.pmf_sweep_mean_matches_mass", mean_gap, 1e-9),
    ]);

    let mut rng = seeded(seed);
    let times = [0.0, 1.3, 2.1];
    let d = DistanceMatrix::absolute_difference(&times)?;
    let f = DecayFunction::Window { nu: 1.5 };
    let a = ProximityMatrix::build(&d, &f)?;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let state = sample_prior(&a, 2.0, &mut rng)?;
        let z = compute_feature_matrix(&state);
        for perm in PERMUTATIONS_3 {
            let (moved, _) = permute_state(&state, &z, &perm)?;
            let ap = ProximityMatrix::build(&d.permuted(&perm)?, &f)?;
            worst = worst.max((log_prior(&state, &a, 2.0)? - log_prior(&moved, &ap, 2.0)?).abs());
        }
    }
    report.extend([CheckResult::at_most("quick.symmetry_all_permutations", worst, 1e-10)]);

    let lik = likelihood_oracle(20, 0, 0, seed)?;
    report.extend(lik.into_iter().take(1).map(|mut c| {
        c.name = "quick.likelihood_gaussian_max_abs_error".into();
        c
    }));
    Ok(report)
}
