mod common;

use proptest::prelude::*;
use proxy_auction::generate::{random_valuation, GeneratorKind, GeneratorParams};
use proxy_auction::valuations::{demand_scan, SetFunction};
use proxy_auction::{Caps, ItemSet, KeepRate, ProxyValuation, Rational, Valuation};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{proxy_brute, r};

fn valuation(kind: usize, m: usize, seed: u64) -> Valuation<Rational> {
    let kind = GeneratorKind::ALL[kind % GeneratorKind::ALL.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_valuation(kind, m, &GeneratorParams::default(), &Caps::default(), &mut rng).unwrap()
}

fn prices(m: usize, seed: u64) -> Vec<Rational> {
    (0..m).map(|j| r(((seed >> (4 * j)) & 15) as i64, 2)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn generated_valuations_are_monotone_normalized_subadditive(
        kind in 0usize..5, m in 1usize..=5, seed in any::<u64>(),
    ) {
        let v = valuation(kind, m, seed);
        prop_assert!(v.is_monotone_normalized(&Caps::default()).unwrap());
        prop_assert!(v.is_subadditive(&Caps::default()).unwrap());
    }

    #[test]
    fn proxy_dominates_scaled_value(kind in 0usize..5, m in 1usize..=5, seed in any::<u64>(), k in 1u64..=5) {
        let v = valuation(kind, m, seed);
        let c = r(1, k as i64);
        for s in ItemSet::all(m) {
            prop_assert!(proxy_brute(&v, &c, s) >= c.clone() * v.eval(s).unwrap());
        }
    }

    #[test]
    fn proxy_closed_forms_match_enumeration(kind in 0usize..5, m in 1usize..=5, seed in any::<u64>(), k in 1u64..=5) {
        let v = valuation(kind, m, seed);
        let proxy = ProxyValuation::new(v.clone(), KeepRate::new(k).unwrap());
        for s in ItemSet::all(m) {
            let direct = proxy.eval(s).unwrap();
            prop_assert_eq!(&direct, &proxy.enumerate(s).unwrap());
            prop_assert_eq!(direct, proxy_brute(&v, &r(1, k as i64), s));
        }
    }

    #[test]
    fn keep_everything_proxy_is_identity(kind in 0usize..5, m in 1usize..=5, seed in any::<u64>()) {
        let v = valuation(kind, m, seed);
        let proxy = ProxyValuation::new(v.clone(), KeepRate::ONE);
        for s in ItemSet::all(m) {
            prop_assert_eq!(proxy.eval(s).unwrap(), v.eval(s).unwrap());
        }
    }

    #[test]
    fn demand_oracles_agree_with_scan(kind in 0usize..5, m in 1usize..=5, seed in any::<u64>(), k in 1u64..=3) {
        let caps = Caps::default();
        let v = valuation(kind, m, seed);
        let p = prices(m, seed.rotate_left(17));
        prop_assert_eq!(v.demand(&p, &caps).unwrap(), demand_scan(&v, &p, &caps).unwrap());
        let proxy = ProxyValuation::new(v, KeepRate::new(k).unwrap());
        prop_assert_eq!(proxy.demand(&p, &caps).unwrap(), demand_scan(&proxy, &p, &caps).unwrap());
    }

    #[test]
    fn float_evaluation_tracks_exact(kind in 0usize..5, m in 1usize..=5, seed in any::<u64>(), k in 1u64..=4) {
        let v = valuation(kind, m, seed);
        let vf = v.convert(|x| num_traits::ToPrimitive::to_f64(x).unwrap());
        let rate = KeepRate::new(k).unwrap();
        let (pe, pf) = (ProxyValuation::new(v, rate), ProxyValuation::new(vf, rate));
        for s in ItemSet::all(m) {
            let want = num_traits::ToPrimitive::to_f64(&pe.eval(s).unwrap()).unwrap();
            prop_assert!((pf.eval(s).unwrap() - want).abs() <= 1e-9 * want.max(1.0));
        }
    }
}
