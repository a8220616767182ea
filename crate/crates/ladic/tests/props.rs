//! Randomized invariants: the two load-bearing inequalities everything
//! else leans on, checked over generated inputs rather than fixed cases.

use ladic::convergent::product_bound_check;
use ladic::freealg::{AlgebraElement, AlgebraSignature, Word};
use ladic::padic::{PadicScalar, Valuation};
use proptest::prelude::*;

fn primes() -> impl Strategy<Value = u64> {
    prop_oneof![Just(2u64), Just(3), Just(5)]
}

proptest! {
    /// Valuations are exactly additive under product and respect the
    /// ultrametric floor under sum, whatever digits survive.
    #[test]
    fn scalar_valuations_are_ultrametric(
        ell in primes(),
        a in -300i128..300,
        b in -300i128..300,
    ) {
        prop_assume!(a != 0 && b != 0);
        let x = PadicScalar::from_integer(ell, 9, a).unwrap();
        let y = PadicScalar::from_integer(ell, 9, b).unwrap();
        let (va, vb) = (x.valuation(), y.valuation());

        let prod = x.mul(&y).unwrap();
        let expect = match (va.finite(), vb.finite()) {
            (Some(p), Some(q)) => Valuation::Finite(p + q),
            _ => Valuation::Infinite,
        };
        prop_assert_eq!(prod.valuation(), expect);

        let sum = x.add(&y).unwrap();
        prop_assert!(sum.valuation() >= va.min(vb));

        let cancel = x.add(&x.neg()).unwrap();
        prop_assert!(cancel.is_zero());
    }
}

fn sparse_element(
    sig: &std::sync::Arc<AlgebraSignature>,
    spec: &[(Vec<u8>, i128)],
) -> AlgebraElement {
    let mut e = AlgebraElement::zero(sig);
    for (letters, c) in spec {
        let w = Word::new(letters.clone());
        let coeff = sig.scalar_from_int(*c);
        let m = AlgebraElement::monomial(sig, w, coeff);
        e = e.add(&m).unwrap();
    }
    e
}

fn term_spec() -> impl Strategy<Value = Vec<(Vec<u8>, i128)>> {
    prop::collection::vec(
        (prop::collection::vec(0u8..2, 0..5), -40i128..40),
        1..5,
    )
}

proptest! {
    /// Word-length filtration is superadditive under products, and the
    /// per-length valuation profile never increases.
    #[test]
    fn filtration_survives_products(xs in term_spec(), ys in term_spec()) {
        let sig = AlgebraSignature::new(3, 8, 6, &[("X", 1), ("Y", 1)]).unwrap();
        let x = sparse_element(&sig, &xs);
        let y = sparse_element(&sig, &ys);
        prop_assert!(product_bound_check(&x, &y, 6).unwrap());

        let v = ladic::convergent::valuation_sequence(&x.mul(&y).unwrap(), 7);
        for w in v.windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
    }
}
