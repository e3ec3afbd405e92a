//! Shared fixtures for the benchmarks.

use harmcalc_core::harm::UtilityTable;
use harmcalc_core::scm::{DiscreteScm, ScmBuilder};

/// Binary action `A` and a chain `Y0 -> Y1 -> ...` of `len` binary
/// variables, each flipped by its own pair of noise inputs, so the model has
/// `4^len` noise states. Utility counts the ones in the chain.
pub fn noisy_chain(len: usize) -> DiscreteScm {
    let mut b = ScmBuilder::new();
    b.endogenous("A", ["0", "1"]).unwrap();
    b.degenerate_exogenous("uA").unwrap();
    b.mechanism_fn("A", &[], &["uA"], |_| 0).unwrap();
    let names: Vec<String> = (0..len).map(|i| format!("Y{i}")).collect();
    for (i, name) in names.iter().enumerate() {
        b.endogenous(name, ["0", "1"]).unwrap();
        let (flip, keep) = (format!("f{i}"), format!("k{i}"));
        b.exogenous(&flip, ["0", "1"], &[0.7, 0.3]).unwrap();
        b.exogenous(&keep, ["0", "1"], &[0.4, 0.6]).unwrap();
        let parent = if i == 0 { "A".to_string() } else { names[i - 1].clone() };
        b.mechanism_fn(name, &[&parent], &[&flip, &keep], |v| (v[0] ^ v[1]) & (v[2] | v[0]))
            .unwrap();
    }
    let outcomes: Vec<&str> = names.iter().map(String::as_str).collect();
    b.roles("A", &[], &outcomes);
    b.build().unwrap()
}

pub fn count_utility(scm: &DiscreteScm) -> UtilityTable {
    UtilityTable::from_fn(scm, |_, _, y| y.iter().sum::<usize>() as f64).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_noise_grows_by_four() {
        assert_eq!(noisy_chain(3).noise_state_count(), 64);
    }
}
