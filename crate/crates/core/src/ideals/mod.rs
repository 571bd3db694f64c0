//! Set algebra on ω and the ideal catalog.

mod ideal;
mod set;

pub use ideal::{
    pairing_column, ClassificationReport, Decision, Generators, Ideal, IdealError, IdealKind, Membership,
    SmallnessEstimator, DEFAULT_MEMBERSHIP_HORIZON, DEFAULT_THETA, SUMMABLE_DIVERGENCE_CUTOFF,
};
pub use set::{Density, Predicate, PrefixSet, SetDescription, SetError};

use crate::index_map::IndexMap;

/// Outcome of a Rudin–Keisler query.
#[derive(Clone, Debug)]
pub enum RkOutcome {
    Witness(IndexMap),
    Unknown(String),
}

/// A map `h` with `S ∈ I ⟺ h⁻¹[S] ∈ J`, for the catalog pairs where one is known.
///
/// Never guesses: pairs without a constructed witness return `Unknown`.
pub fn rk_below(i: &Ideal, j: &Ideal) -> RkOutcome {
    match (i.kind(), j.kind()) {
        (IdealKind::FinOplusFull { t }, IdealKind::Fin) => RkOutcome::Witness(IndexMap::enumeration_of(t.clone())),
        (IdealKind::Fin, IdealKind::Fin) => RkOutcome::Witness(IndexMap::identity()),
        (IdealKind::ErdosUlam { .. }, IdealKind::ErdosUlam { .. }) => RkOutcome::Unknown(
            "Erdős–Ulam ideals are Rudin–Keisler comparable, but no explicit map is constructed".into(),
        ),
        _ => RkOutcome::Unknown(format!("no witness known for {i} ≤RK {j}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk_witnesses() {
        let i = Ideal::fin_oplus_full(SetDescription::evens()).unwrap();
        let RkOutcome::Witness(h) = rk_below(&i, &Ideal::fin()) else {
            panic!("expected a witness");
        };
        assert!((0..100).all(|n| h.apply(n) == 2 * n));
        let RkOutcome::Witness(id) = rk_below(&Ideal::fin(), &Ideal::fin()) else {
            panic!("expected identity");
        };
        assert_eq!(id.apply(17), 17);
        assert!(matches!(rk_below(&Ideal::density_zero(), &Ideal::fin()), RkOutcome::Unknown(_)));
        let eu = Ideal::erdos_ulam(-1.0).unwrap();
        assert!(matches!(rk_below(&eu, &eu), RkOutcome::Unknown(_)));
    }

    #[test]
    fn rk_witness_transports_membership() {
        // S ∈ I ⟺ h⁻¹[S] ∈ Fin for the enumeration of T = AP(1,3)
        let t = SetDescription::progression(1, 3);
        let i = Ideal::fin_oplus_full(t.clone()).unwrap();
        let RkOutcome::Witness(h) = rk_below(&i, &Ideal::fin()) else {
            panic!()
        };
        for s in [SetDescription::evens(), SetDescription::progression(0, 3), SetDescription::squares()] {
            let in_i = i.membership(&s) == Membership::InIdeal;
            let tail_preimage = (5_000..10_000u64).any(|n| s.contains(h.apply(n)));
            assert_eq!(in_i, !tail_preimage, "{s}");
        }
    }
}
