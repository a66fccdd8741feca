mod common;

use common::*;
use cre_core::corpus::enumerate_pairs;
use cre_core::predict::{
    oracle_event, oracle_event_type, oracle_type, EventOracle, EventTypeOracle, GoldIndex,
    PredictError, TypeOracle,
};
use cre_core::{CandidateInstance, Predictor, Sentence};
use proptest::prelude::*;

/// Enumerated candidates of every sentence with gold labels from `bits`.
fn labeled(
    corpus: &[Sentence],
    schema: &cre_core::SchemaConfig,
    bits: &[bool],
) -> Vec<CandidateInstance> {
    corpus
        .iter()
        .flat_map(|s| enumerate_pairs(s, schema))
        .enumerate()
        .map(|(i, c)| c.with_gold(bits.get(i % bits.len().max(1)).copied().unwrap_or(false)))
        .collect()
}

proptest! {
    #[test]
    fn event_oracle_matches_existential(
        schema in arb_schema(),
        corpus in arb_corpus(6, 5),
        bits in prop::collection::vec(any::<bool>(), 1..40),
    ) {
        let gold = labeled(&corpus, &schema, &bits);
        let index = GoldIndex::from_instances(&gold);
        let preds = oracle_event(&gold, &index).unwrap();
        for (inst, pred) in gold.iter().zip(&preds) {
            let want = gold.iter().any(|g| {
                g.sentence_id() == inst.sentence_id()
                    && g.relation() == inst.relation()
                    && g.gold() == Some(true)
            });
            prop_assert_eq!(pred.binary(), want);
            prop_assert_eq!(&pred.instance_id, inst.instance_id());
        }
    }

    #[test]
    fn event_type_is_conjunction(
        schema in arb_schema(),
        other in arb_schema(),
        corpus in arb_corpus(6, 5),
        bits in prop::collection::vec(any::<bool>(), 1..40),
    ) {
        // Candidates come from `schema` but types are judged by `other`, so
        // the type oracle is not trivially true.
        let gold = labeled(&corpus, &schema, &bits);
        let index = GoldIndex::from_instances(&gold);
        let event = oracle_event(&gold, &index).unwrap();
        let both = oracle_event_type(&gold, &index, &other).unwrap();
        for ((inst, e), b) in gold.iter().zip(&event).zip(&both) {
            let t = oracle_type(inst, &other).binary();
            prop_assert_eq!(b.binary(), e.binary() && t);
            let brute = other.relations.iter().any(|r| {
                r.relation == inst.relation()
                    && r.subject_types.contains(&inst.subject().etype)
                    && r.object_types.contains(&inst.object().etype)
            });
            prop_assert_eq!(t, brute);
        }
        let via_trait = EventTypeOracle { gold: index, schema: other }.predict_batch(&gold).unwrap();
        prop_assert_eq!(via_trait, both);
    }

    #[test]
    fn type_oracle_ignores_surfaces(
        schema in arb_schema(),
        sentence in arb_sentence("s".into(), 6),
    ) {
        let candidates = enumerate_pairs(&sentence, &schema);
        let mut renamed = sentence.clone();
        renamed.tokens = renamed.tokens.iter().rev().map(|t| format!("{t}x")).collect();
        for m in &mut renamed.mentions {
            m.surface = renamed.tokens[m.start..=m.end].join(" ");
        }
        let renamed_candidates = enumerate_pairs(&renamed, &schema);
        let oracle = TypeOracle { schema: schema.clone() };
        let a = oracle.predict_batch(&candidates).unwrap();
        let b = oracle.predict_batch(&renamed_candidates).unwrap();
        let decisions = |p: &[cre_core::Prediction]| p.iter().map(|x| x.binary()).collect::<Vec<_>>();
        prop_assert_eq!(decisions(&a), decisions(&b));
        // Enumeration already enforces compatibility.
        prop_assert!(a.iter().all(|p| p.binary()));
    }
}

#[test]
fn event_oracle_refuses_unknown_sentence() {
    let schema = person_schema();
    let a = sentence("a", 4, &[(0, 0, 0), (2, 2, 0)]);
    let b = sentence("b", 4, &[(0, 0, 0), (2, 2, 0)]);
    let gold: Vec<_> = enumerate_pairs(&a, &schema)
        .into_iter()
        .map(|c| c.with_gold(true))
        .collect();
    let oracle = EventOracle {
        gold: GoldIndex::from_instances(&gold),
    };
    let err = oracle
        .predict_batch(&enumerate_pairs(&b, &schema))
        .unwrap_err();
    assert!(matches!(err, PredictError::SentenceNotInGold(s) if s == "b"));
}
