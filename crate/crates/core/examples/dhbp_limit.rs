//! The truncated dependent hierarchical beta process: pooled sharing
//! fractions of customers in the same and in different groups, against the
//! truncated prediction and the large-mass limit.

use ddibp::random::seeded;
use ddibp::theory::{dhbp_limit_fractions, dhbp_truncated_fractions, sample_dhbp_grouped, sharing_stats, DhbpParams};
use ddibp::verify::limit_instance;

fn main() -> ddibp::error::Result<()> {
    let (same, diff) = dhbp_limit_fractions(10.0, 1.0)?;
    println!("limits: same group {same:.4}, different groups {diff:.4}");
    let mut rng = seeded(5);
    for k_trunc in [2_000, 20_000, 200_000] {
        let params = DhbpParams::new(1000.0, 10.0, 1.0, k_trunc, limit_instance())?;
        let n = params.n();
        let (ps, pd) = dhbp_truncated_fractions(&params);
        let (mut sums, mut counts) = ([0.0; 2], [0usize; 2]);
        for _ in 0..20 {
            let draw = sample_dhbp_grouped(&params, &mut rng);
            let s = sharing_stats(&draw.z);
            for i in 0..n {
                for j in (0..n).filter(|&j| j != i) {
                    let g = usize::from(draw.groups[i] != draw.groups[j]);
                    sums[g] += s.fraction[i][j];
                    counts[g] += 1;
                }
            }
        }
        println!(
            "K_t {k_trunc:>7}: predicted {ps:.4} / {pd:.4}, simulated {:.4} / {:.4}",
            sums[0] / counts[0].max(1) as f64,
            sums[1] / counts[1].max(1) as f64
        );
    }
    Ok(())
}
