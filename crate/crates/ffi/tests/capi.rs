use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use judgebench::metrics::{self, RougeVariant};
use judgebench::stats;
use judgebench_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> Option<String> {
    let p = jb_last_error_message();
    if p.is_null() {
        return None;
    }
    let msg = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
    unsafe { jb_string_free(p) };
    Some(msg)
}

#[test]
fn metrics_match_the_library() {
    let (cand, refr) = ("the cat sat on the mat", "the cat is on the mat");
    let mut v = 0.0;
    unsafe {
        assert_eq!(jb_bleu(c(cand).as_ptr(), c(refr).as_ptr(), &mut v), JbStatus::Ok);
        assert_eq!(v, metrics::bleu(cand, refr).unwrap());
        for (cv, rv) in [
            (JbRouge::Rouge1, RougeVariant::R1),
            (JbRouge::Rouge2, RougeVariant::R2),
            (JbRouge::RougeL, RougeVariant::L),
        ] {
            assert_eq!(jb_rouge(c(cand).as_ptr(), c(refr).as_ptr(), cv, &mut v), JbStatus::Ok);
            assert_eq!(v, metrics::rouge(cand, refr, rv).unwrap());
        }
        let (p, q) = ([0.5, 0.5, 0.0], [0.1, 0.2, 0.7]);
        assert_eq!(jb_jsd(p.as_ptr(), q.as_ptr(), 3, &mut v), JbStatus::Ok);
        assert_eq!(v, metrics::jsd(&p, &q).unwrap());
    }
    assert!(last_error().is_none());
}

#[test]
fn greedy_match_reads_row_major_tokens() {
    let cand = [1.0, 0.0, 0.0, 1.0];
    let refr = [1.0, 0.0];
    let (mut p, mut r, mut f) = (0.0, 0.0, 0.0);
    let st = unsafe { jb_greedy_match(cand.as_ptr(), 2, refr.as_ptr(), 1, 2, &mut p, &mut r, &mut f) };
    assert_eq!(st, JbStatus::Ok);
    let want = metrics::greedy_match(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[vec![1.0, 0.0]]).unwrap();
    assert_eq!((p, r, f), (want.precision, want.recall, want.f));
}

#[test]
fn null_and_bad_utf8_are_reported() {
    let mut v = 0.0;
    unsafe {
        assert_eq!(jb_bleu(ptr::null(), c("x").as_ptr(), &mut v), JbStatus::NullPointer);
        assert!(last_error().unwrap().contains("candidate"));
        let bad = [0xffu8, 0xfe, 0];
        assert_eq!(
            jb_bleu(bad.as_ptr().cast(), c("x").as_ptr(), &mut v),
            JbStatus::InvalidUtf8
        );
        assert_eq!(
            jb_bleu(c("x").as_ptr(), c("x").as_ptr(), ptr::null_mut()),
            JbStatus::NullPointer
        );
        let p = [1.0, 0.0];
        assert_eq!(
            jb_jsd(p.as_ptr(), [0.0, 0.0].as_ptr(), 2, &mut v),
            JbStatus::InvalidArgument
        );
        assert!(last_error().is_some());
        // a later success clears the message
        assert_eq!(jb_jsd(p.as_ptr(), p.as_ptr(), 2, &mut v), JbStatus::Ok);
    }
    assert!(last_error().is_none());
}

#[test]
fn stats_match_the_library() {
    let values = [0.9, 0.2, 0.1, 0.3, 0.8, 0.2, 0.1, 0.3, 0.7];
    let mut gaps = [0.0; 3];
    unsafe {
        assert_eq!(
            jb_centered_gaps(values.as_ptr(), 3, true, gaps.as_mut_ptr()),
            JbStatus::Ok
        );
        let m = stats::ScoreMatrix {
            judges: vec!["a".into(), "b".into(), "c".into()],
            values: values.chunks(3).map(<[f64]>::to_vec).collect(),
            metric_name: "m".into(),
            higher_is_better: true,
        };
        assert_eq!(gaps.to_vec(), stats::centered_gaps(&m).unwrap());

        let (mut w, mut p) = (0.0, 0.0);
        let d = [0.5, 0.4, 0.3];
        assert_eq!(jb_wilcoxon(d.as_ptr(), 3, &mut w, &mut p), JbStatus::Ok);
        assert!((p - 0.25).abs() < 1e-12);

        let a = [0.6, 0.7, 0.8, 0.9, 0.5];
        let b = [0.1, 0.2, 0.3, 0.2, 0.1];
        let (mut gap, mut pb) = (0.0, 0.0);
        assert_eq!(
            jb_paired_bootstrap(a.as_ptr(), b.as_ptr(), 5, 500, 9, &mut gap, &mut pb),
            JbStatus::Ok
        );
        let want = stats::paired_bootstrap(&a, &b, 500, 9).unwrap();
        assert_eq!((gap, pb), (want.mean_gap, want.p_value));

        let mut ac1 = 0.0;
        assert_eq!(jb_gwet_ac1(40, 40, 10, 10, &mut ac1), JbStatus::Ok);
        assert!((ac1 - 0.6).abs() < 1e-12);
        assert_eq!(jb_gwet_ac1(0, 0, 0, 0, &mut ac1), JbStatus::InvalidArgument);
    }
}

#[test]
fn prefix_offset_cuts_after_ceil_tokens() {
    let text = "one two three four five six seven eight nine ten";
    let mut off = 0usize;
    let st = unsafe { jb_prefix_offset(c(text).as_ptr(), 0.25, &mut off) };
    assert_eq!(st, JbStatus::Ok);
    assert!(text[..off].trim_end().ends_with("three"), "{:?}", &text[..off]);
}

#[test]
fn index_returns_positions_in_input_order() {
    let vectors = [1.0, 0.0, 0.0, 1.0, 0.7, 0.7, 1.0, 0.0];
    let mut idx = ptr::null_mut();
    unsafe {
        assert_eq!(jb_index_new(vectors.as_ptr(), 4, 2, &mut idx), JbStatus::Ok);
        assert_eq!(jb_index_len(idx), 4);
        let q = [2.0, 0.1];
        let mut pos = [usize::MAX; 3];
        let mut scores = [0.0; 3];
        assert_eq!(
            jb_index_query(idx, q.as_ptr(), 2, 3, pos.as_mut_ptr(), scores.as_mut_ptr()),
            JbStatus::Ok
        );
        // positions 0 and 3 tie; the earlier one wins
        assert_eq!(pos, [0, 3, 2]);
        assert!(scores[0] >= scores[1] && scores[1] > scores[2]);
        assert_eq!(
            jb_index_query(idx, q.as_ptr(), 2, 5, pos.as_mut_ptr(), scores.as_mut_ptr()),
            JbStatus::InvalidArgument
        );
        jb_index_free(idx);
        jb_index_free(ptr::null_mut());
    }
}

#[test]
fn authorship_model_separates_two_styles() {
    let pos: Vec<CString> = (0..30)
        .map(|i| c(&format!("alpha beta gamma delta number {i} alpha.")))
        .collect();
    let neg: Vec<CString> = (0..30)
        .map(|i| c(&format!("zulu yankee xray whisky item {i} zulu!")))
        .collect();
    let pp: Vec<_> = pos.iter().map(|s| s.as_ptr()).collect();
    let np: Vec<_> = neg.iter().map(|s| s.as_ptr()).collect();
    let mut model = ptr::null_mut();
    unsafe {
        assert_eq!(
            jb_authorship_train(pp.as_ptr(), 30, np.as_ptr(), 30, 1, &mut model),
            JbStatus::Ok
        );
        let (mut a, mut b) = (0.0, 0.0);
        assert_eq!(
            jb_authorship_probability(model, c("alpha beta gamma delta").as_ptr(), &mut a),
            JbStatus::Ok
        );
        assert_eq!(
            jb_authorship_probability(model, c("zulu yankee xray whisky").as_ptr(), &mut b),
            JbStatus::Ok
        );
        assert!(a > 0.5 && b < 0.5, "{a} {b}");
        jb_authorship_free(model);
        assert_eq!(
            jb_authorship_train(pp.as_ptr(), 30, ptr::null(), 3, 1, &mut model),
            JbStatus::NullPointer
        );
    }
}

#[test]
fn header_declares_every_export_and_compiles() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/judgebench.h");
    let text = std::fs::read_to_string(&header).unwrap();
    let src = std::fs::read_to_string(dir.join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 15);
    for name in exports {
        assert!(text.contains(&format!("{name}(")), "{name} missing from header");
    }
    let Ok(status) = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(&header)
        .status()
    else {
        eprintln!("no C compiler; skipping syntax check");
        return;
    };
    assert!(status.success());
}
