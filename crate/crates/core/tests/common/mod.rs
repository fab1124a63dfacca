//! Deterministic synthetic corpora for integration tests.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reqclass::corpus::{Dataset, Label, RequirementRecord};

/// Class sizes of the expanded PROMISE corpus (969 rows).
pub const PROMISE_COUNTS: [(Label, usize); 12] = [
    (Label::F, 444),
    (Label::SE, 125),
    (Label::US, 85),
    (Label::O, 77),
    (Label::PE, 67),
    (Label::LF, 49),
    (Label::A, 31),
    (Label::MN, 24),
    (Label::SC, 22),
    (Label::FT, 18),
    (Label::L, 15),
    (Label::PO, 12),
];

const SHARED: &[&str] = &[
    "the", "system", "shall", "be", "able", "to", "user", "product", "data", "all", "within", "of", "and", "must",
];

fn class_words(label: Label) -> &'static [&'static str] {
    match label {
        Label::F => &["display", "record", "report", "allow", "enter", "select", "view", "update", "list", "schedule"],
        Label::SE => &["password", "encrypt", "authorized", "access", "login", "secure", "audit", "privileges"],
        Label::US => &["easy", "intuitive", "learn", "help", "training", "understand", "navigate", "friendly"],
        Label::O => &["operate", "environment", "server", "browser", "windows", "interface", "database"],
        Label::PE => &["seconds", "response", "load", "concurrent", "performance", "fast", "throughput"],
        Label::LF => &["color", "look", "appearance", "font", "screen", "logo", "style"],
        Label::A => &["available", "uptime", "hours", "downtime", "percent", "outage"],
        Label::MN => &["maintain", "modify", "update", "code", "documented", "changes"],
        Label::SC => &["scale", "users", "increase", "capacity", "growth", "expand"],
        Label::FT => &["fault", "failure", "recover", "backup", "tolerate", "restart"],
        Label::L => &["law", "regulation", "comply", "legal", "license", "policy"],
        Label::PO => &["port", "platform", "linux", "mobile", "portable", "devices"],
    }
}

/// A labelled corpus with the given class sizes. Each sentence mixes shared
/// filler with class vocabulary and a little cross-class noise.
pub fn corpus(counts: &[(Label, usize)], seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    for &(label, n) in counts {
        for _ in 0..n {
            let len = rng.gen_range(6..14);
            let mut words: Vec<&str> = Vec::with_capacity(len);
            for _ in 0..len {
                let w = match rng.gen_range(0..10) {
                    0..=3 => *SHARED.choose(&mut rng).unwrap(),
                    4..=8 => *class_words(label).choose(&mut rng).unwrap(),
                    _ => {
                        let other = Label::ALL.choose(&mut rng).unwrap();
                        *class_words(*other).choose(&mut rng).unwrap()
                    }
                };
                words.push(w);
            }
            records.push(RequirementRecord {
                id: format!("{}", records.len() + 1),
                text: words.join(" "),
                label,
            });
        }
    }
    Dataset::new(records)
}

pub fn promise_like(seed: u64) -> Dataset {
    corpus(&PROMISE_COUNTS, seed)
}

/// Writes `d` with the PROMISE_exp header (`ProjectID,RequirementText,_class_`).
pub fn write_promise_csv(d: &Dataset, path: &Path) -> PathBuf {
    let mut w = csv::Writer::from_path(path).unwrap();
    w.write_record(["ProjectID", "RequirementText", "_class_"]).unwrap();
    for r in d.records() {
        w.write_record([r.id.as_str(), r.text.as_str(), r.label.code()]).unwrap();
    }
    w.flush().unwrap();
    path.to_path_buf()
}
