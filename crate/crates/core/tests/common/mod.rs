#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use judgebench::corpus::VerdictDoc;
use judgebench::gateway::{ChatRule, Gateway, GatewayOptions, MockScript, MockTransport, RetryPolicy};

pub const S1: &str = "בית המשפט שקל את חומרת העבירה ואת נסיבותיה.";
pub const S2: &str = "הנאשם הודה בהזדמנות הראשונה וחסך זמן שיפוטי.";
pub const S3: &str = "הדיון נדחה למועד אחר לבקשת הצדדים.";

pub fn doc(judge: &str, case: &str, text: &str) -> VerdictDoc {
    VerdictDoc {
        judge_id: judge.into(),
        case_id: case.into(),
        text: text.into(),
        date: None,
    }
}

/// One verdict holding the three fixture sentences plus fact recitation.
pub fn fixture_doc() -> VerdictDoc {
    doc(
        "judge_a",
        "case_1",
        &format!("העובדות אינן שנויות במחלוקת. {S1} {S2} {S3}"),
    )
}

fn sentences_json(sentences: &[&str]) -> String {
    serde_json::to_string(&serde_json::json!({ "משפטים": sentences })).unwrap()
}

/// Extraction yields S1..S3, S3 is rejected as non-reasoning, each accepted
/// sentence gets one question, and Step 4 answers with `pair_verdicts` in
/// order (the last one repeats).
pub fn fixture_script(pair_verdicts: &[&str]) -> MockScript {
    MockScript {
        chat: vec![
            ChatRule::new("extract", &[&sentences_json(&[S1, S2, S3])]),
            ChatRule::new("validate_reasoning", &["לא"]).when_user_contains("הדיון נדחה"),
            ChatRule::new("validate_reasoning", &["כן"]),
            ChatRule::new("generate_question", &["1. מה שקל בית המשפט בגזירת הדין?"])
                .when_user_contains("חומרת")
                .when_nonce(0),
            ChatRule::new("generate_question", &["1. מתי הודה הנאשם?"])
                .when_user_contains("הודה")
                .when_nonce(0),
            ChatRule::new("generate_question", &["1. שאלה מנוסחת מחדש?"]),
            ChatRule::new("validate_pair", pair_verdicts),
        ],
        ..MockScript::default()
    }
}

pub fn quick_retry() -> RetryPolicy {
    RetryPolicy {
        max_retries: 2,
        base_delay: Duration::from_millis(1),
        max_delay: Duration::from_millis(2),
    }
}

pub fn gateway(script: MockScript, cache: Option<&Path>) -> (Gateway, Arc<MockTransport>) {
    let mock = Arc::new(MockTransport::new(script));
    let opts = GatewayOptions {
        retry: quick_retry(),
        cache_dir: cache.map(Path::to_path_buf),
        ..GatewayOptions::default()
    };
    (Gateway::new(mock.clone(), opts).unwrap(), mock)
}

use judgebench::discernment::{Label, LabeledSentence, SentenceSource};
use rand::seq::SliceRandom;
use rand::Rng;

/// `size` distinct lowercase words of 3 to 8 letters.
pub fn vocabulary<R: Rng>(rng: &mut R, size: usize) -> Vec<String> {
    let mut words = std::collections::BTreeSet::new();
    while words.len() < size {
        let len = rng.gen_range(3..=8);
        words.insert((0..len).map(|_| rng.gen_range(b'a'..=b'z') as char).collect::<String>());
    }
    let mut v: Vec<String> = words.into_iter().collect();
    v.shuffle(rng);
    v
}

/// Two vocabularies with no word in common.
pub fn disjoint_vocabularies<R: Rng>(rng: &mut R, size: usize) -> (Vec<String>, Vec<String>) {
    let all = vocabulary(rng, 2 * size);
    (all[..size].to_vec(), all[size..].to_vec())
}

pub fn sentences<R: Rng>(
    rng: &mut R,
    vocab: &[String],
    n: usize,
    id_prefix: &str,
    label: Label,
) -> Vec<LabeledSentence> {
    (0..n)
        .map(|i| {
            let len = rng.gen_range(8..=16);
            let words: Vec<&str> = (0..len).map(|_| vocab.choose(rng).unwrap().as_str()).collect();
            LabeledSentence {
                id: format!("{id_prefix}{i}"),
                text: format!("{}.", words.join(" ")),
                label,
                source: match label {
                    Label::Positive => SentenceSource::RealJudge,
                    Label::Negative => SentenceSource::RealOtherJudge,
                },
            }
        })
        .collect()
}
