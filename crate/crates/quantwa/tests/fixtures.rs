mod common;

use common::{fixture, fixture_text, models_dir};
use quantwa::extrema::{extrema_distribution, extrema_expected};
use quantwa::format::{emit_model, parse_model};
use quantwa::general::scc_structure;
use quantwa::oracle::{all_words, word_value_by_runs};
use quantwa::rational::{int, ratio};
use quantwa::recurrent::check_recurrent;
use quantwa::word::word_value;
use quantwa::{validate_model, ExtendedValue};

#[test]
fn every_fixture_is_canonical_and_valid() {
    let mut names: Vec<String> = std::fs::read_dir(models_dir())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".wqa"))
        .collect();
    names.sort();
    assert!(names.len() >= 7, "{names:?}");
    for name in names {
        let text = fixture_text(&name);
        let doc = parse_model(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        validate_model(&doc.automaton, &doc.chain).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(emit_model(&doc.automaton, &doc.chain).unwrap(), text, "{name} is not canonical");
    }
}

#[test]
fn first_letter_inf_distribution() {
    let doc = fixture("first_letter_inf.wqa");
    let (a, m) = (&doc.automaton, &doc.chain);
    // The weight-0 branch dies on the first b, so it almost never counts.
    assert_eq!(extrema_distribution(a, m, &int(0)).unwrap(), int(0));
    assert_eq!(extrema_distribution(a, m, &int(1)).unwrap(), ratio(1, 2));
    assert_eq!(extrema_distribution(a, m, &int(2)).unwrap(), ratio(1, 2));
    assert_eq!(extrema_distribution(a, m, &int(3)).unwrap(), int(1));
    assert_eq!(extrema_expected(a, m).unwrap(), ExtendedValue::Finite(int(2)));
}

#[test]
fn escape_has_one_permanent_and_one_transitory_component() {
    let doc = fixture("escape.wqa");
    let s = scc_structure(&doc.automaton, &doc.chain).unwrap();
    assert_eq!(s.len(), 1);
    let verdicts: Vec<(String, bool)> =
        s[0].sccs.iter().map(|v| (doc.automaton.format_set(&v.states), v.permanent)).collect();
    assert_eq!(verdicts, vec![("{qI}".into(), true), ("{qF}".into(), false)]);
}

#[test]
fn recurrence_verdicts() {
    assert!(check_recurrent(&fixture("ab_balance.wqa").automaton).recurrent);
    assert!(!check_recurrent(&fixture("swing_both.wqa").automaton).recurrent);
    assert!(check_recurrent(&fixture("swing_left.wqa").automaton).recurrent);
}

fn is_quadruple_chain(word: &[usize]) -> bool {
    // a b a^4 b a^16 ... b a^(4^n), with letter 0 = a and 1 = b.
    let mut expected = 1usize;
    let mut blocks = word.split(|&x| x == 1);
    let mut count = 0;
    for block in blocks.by_ref() {
        if block.len() != expected || block.iter().any(|&x| x != 0) {
            return false;
        }
        expected *= 4;
        count += 1;
    }
    count > 0
}

#[test]
fn quadruple_blocks_value_zero_exactly_on_the_pattern() {
    let a = fixture("quadruple_blocks.wqa").automaton;
    let sep = a.letter_index("b").unwrap();
    assert_eq!(sep, 1);
    assert_eq!(word_value(&a, &[]).unwrap(), ExtendedValue::Finite(int(0)));
    for len in 1..=9 {
        for w in all_words(2, len) {
            let v = word_value(&a, &w).unwrap();
            assert_eq!(v, word_value_by_runs(&a, &w), "{}", a.format_word(&w));
            let zero = is_quadruple_chain(&w);
            match v {
                ExtendedValue::Finite(x) if zero => assert_eq!(x, int(0), "{}", a.format_word(&w)),
                ExtendedValue::Finite(x) => assert!(x <= int(-1), "{} has value {x}", a.format_word(&w)),
                ExtendedValue::Infinite => panic!("{} has no accepting run", a.format_word(&w)),
            }
        }
    }
}

#[test]
fn capped_variant_is_min_with_minus_one_on_nonempty_words() {
    let a = fixture("quadruple_blocks.wqa").automaton;
    let c = fixture("quadruple_blocks_capped.wqa").automaton;
    assert_eq!(word_value(&c, &[]).unwrap(), ExtendedValue::Finite(int(0)));
    for len in 1..=8 {
        for w in all_words(2, len) {
            let va = word_value(&a, &w).unwrap().finite().cloned().unwrap();
            let vc = word_value(&c, &w).unwrap();
            assert_eq!(vc, ExtendedValue::Finite(va.min(int(-1))));
        }
    }
}
