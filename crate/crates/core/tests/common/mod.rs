//! Helpers shared by the integration test targets.

use didpower_core::{
    power, required_clusters, required_subjects, DesignKind, Error, FollowUpPattern, PowerSpec, TrialDesign,
    VarianceComponents,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_solver_config(i: u64) -> (PowerSpec, TrialDesign, VarianceComponents) {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + i);
    let vc = VarianceComponents::new(
        rng.random_range(0.0..0.1),
        rng.random_range(0.001..0.1),
        rng.random_range(0.0..1.0),
        rng.random_range(0.05..1.0),
    )
    .unwrap();
    let l1 = rng.random_range(0.0..0.6);
    let l2 = rng.random_range(0.0..0.6);
    let kind = DesignKind::ALL[(i % 6) as usize];
    let pattern = FollowUpPattern::partial(l1, l2, rng.random_range(0.0..0.6), rng.random_range(0.0..0.6));
    let design =
        TrialDesign::balanced(rng.random_range(3..40), rng.random_range(5..200), pattern, kind).with_kind(kind);
    let spec = PowerSpec::new(rng.random_range(0.05..0.6), 0.05, rng.random_range(0.5..0.95)).unwrap();
    (spec, design, vc)
}

/// Solves for `J` and `K` and checks that the answer reaches the target while
/// one less does not. Returns the subject count, `None` when that target is
/// unattainable.
pub fn check_bracketing(
    spec: &PowerSpec,
    design: &TrialDesign,
    vc: &VarianceComponents,
) -> Result<Option<u32>, String> {
    let at_j = |j: u32| {
        power(spec, &design.with_clusters(j), vc)
            .map(|r| r.power)
            .map_err(|e| e.to_string())
    };
    let j = required_clusters(spec, design, vc).map_err(|e| e.to_string())?;
    if at_j(j)? < spec.target_power || (j > 2 && at_j(j - 1)? >= spec.target_power) {
        return Err(format!("J = {j} does not bracket target {}", spec.target_power));
    }

    let subjects = match required_subjects(spec, design, vc) {
        Ok(k) => {
            let reached = power(spec, &design.with_k(k), vc).map_err(|e| e.to_string())?.power;
            // K - 1 can be inadmissible for a reduced cohort; that still brackets.
            let below = power(spec, &design.with_k(k - 1), vc).map(|r| r.power).unwrap_or(0.0);
            if reached < spec.target_power || (k > 1 && below >= spec.target_power) {
                return Err(format!("K = {k} does not bracket target {}", spec.target_power));
            }
            Some(k)
        }
        Err(Error::UnattainablePower { supremum, .. }) if supremum <= spec.target_power => None,
        Err(e) => return Err(e.to_string()),
    };
    Ok(subjects)
}
