mod common;

use eqhard::metrics::{
    bleu_prf, corpus_dist_n, corpus_pairwise_bleu, dist_n, harmonic_mean, mode_coverage, pairwise_bleu,
    sentence_bleu, DistGranularity, ResponseSet,
};
use proptest::prelude::*;

fn sentence() -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(0u32..6, 0..9)
}

fn nonempty_sentence() -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(0u32..6, 1..9)
}

fn response_set() -> impl Strategy<Value = ResponseSet<u32>> {
    (
        prop::collection::vec(sentence(), 1..5),
        prop::collection::vec(sentence(), 1..4),
    )
        .prop_map(|(h, r)| ResponseSet::new(h, r))
}

fn in_unit(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

proptest! {
    #[test]
    fn sentence_bleu_matches_oracle(hyp in sentence(), refs in prop::collection::vec(nonempty_sentence(), 1..4), n in 1usize..=2) {
        let got = sentence_bleu(&hyp, &refs, n).unwrap();
        prop_assert!(in_unit(got));
        prop_assert!((got - common::bleu_oracle(&hyp, &refs, n)).abs() < 1e-12);
    }

    #[test]
    fn all_metrics_in_unit_interval(sets in prop::collection::vec(response_set(), 1..4)) {
        for n in [1, 2] {
            let prf = bleu_prf(&sets, n).unwrap();
            prop_assert!(in_unit(prf.p) && in_unit(prf.r) && in_unit(prf.f));
            prop_assert!(in_unit(corpus_dist_n(&sets, n, DistGranularity::PerContext)));
            prop_assert!(in_unit(corpus_dist_n(&sets, n, DistGranularity::Corpus)));
        }
        if let Some(pb) = corpus_pairwise_bleu(&sets) {
            prop_assert!(in_unit(pb));
        }
    }

    #[test]
    fn swapping_sides_swaps_precision_and_recall(sets in prop::collection::vec(response_set(), 1..4), n in 1usize..=2) {
        let a = bleu_prf(&sets, n).unwrap();
        let swapped: Vec<_> = sets.into_iter().map(ResponseSet::swapped).collect();
        let b = bleu_prf(&swapped, n).unwrap();
        prop_assert_eq!(a.p, b.r);
        prop_assert_eq!(a.r, b.p);
        prop_assert_eq!(a.f, b.f);
    }

    #[test]
    fn f_is_harmonic_mean(sets in prop::collection::vec(response_set(), 1..4)) {
        let prf = bleu_prf(&sets, 2).unwrap();
        if prf.p == 0.0 || prf.r == 0.0 {
            prop_assert_eq!(prf.f, 0.0);
        } else {
            prop_assert!((prf.f - 2.0 * prf.p * prf.r / (prf.p + prf.r)).abs() < 1e-12);
        }
        prop_assert_eq!(harmonic_mean(0.0, 0.7), 0.0);
    }

    #[test]
    fn dist_is_one_exactly_when_ngrams_are_unique(hyps in prop::collection::vec(sentence(), 1..5), n in 1usize..=2) {
        let d = dist_n(&hyps, n);
        prop_assert!(d <= 1.0);
        prop_assert_eq!(d, common::dist_oracle(&hyps, n));
        let mut all: Vec<&[u32]> = hyps.iter().flat_map(|h| h.windows(n)).collect();
        let total = all.len();
        all.sort();
        all.dedup();
        prop_assert_eq!(d == 1.0, total > 0 && all.len() == total);
    }

    #[test]
    fn identical_hypotheses_have_unit_pairwise_bleu(s in nonempty_sentence(), copies in 2usize..5) {
        prop_assert_eq!(pairwise_bleu(&vec![s; copies]), Some(1.0));
    }

    #[test]
    fn hypothesis_order_does_not_matter(set in response_set(), rotate in 0usize..4, modes in prop::collection::vec(nonempty_sentence(), 1..4)) {
        let mut h = set.hypotheses.clone();
        let r = rotate % h.len();
        h.rotate_left(r);
        h.reverse();
        let permuted = vec![ResponseSet::new(h.clone(), set.references.clone())];
        let original = vec![set.clone()];
        for n in [1, 2] {
            let a = bleu_prf(&original, n).unwrap();
            let b = bleu_prf(&permuted, n).unwrap();
            prop_assert!((a.p - b.p).abs() < 1e-12 && (a.r - b.r).abs() < 1e-12 && (a.f - b.f).abs() < 1e-12);
            prop_assert_eq!(dist_n(&set.hypotheses, n), dist_n(&h, n));
        }
        match (pairwise_bleu(&set.hypotheses), pairwise_bleu(&h)) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
            (a, b) => prop_assert_eq!(a, b),
        }
        prop_assert_eq!(
            mode_coverage(&set.hypotheses, &modes, 0.6).unwrap(),
            mode_coverage(&h, &modes, 0.6).unwrap()
        );
    }
}
