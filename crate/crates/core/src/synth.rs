//! Template grammar for a synthetic flight-information domain. It supplies
//! the unlabeled pretraining text and a labeled intent/slot task with
//! multi-token slot values.

use rand::seq::IndexedRandom;
use rand::Rng as _;

use crate::error::Result;
use crate::seed::{derived_rng, Rng};
use crate::slu::{SluDataset, TaggedUtterance};

/// Train/validation/test sizes of the full-size task.
pub const FULL_SPLIT: [usize; 3] = [4478, 500, 893];
/// Train/validation/test sizes of the bundled task.
pub const BUNDLED_SPLIT: [usize; 3] = [250, 50, 100];
/// Sentences in the bundled toy pretraining corpus.
pub const TOY_SPLIT: [usize; 2] = [200, 50];
/// Sentences in the bundled pretraining corpus.
pub const PRETRAIN_SPLIT: [usize; 2] = [2000, 200];

pub const TOY_SEED: u64 = 11;
pub const PRETRAIN_SEED: u64 = 12;
pub const TASK_SEED: u64 = 13;

const CITIES: &[&str] = &[
    "boston", "denver", "atlanta", "dallas", "pittsburgh", "baltimore", "philadelphia", "san francisco",
    "new york", "los angeles", "salt lake city", "kansas city", "las vegas", "washington", "seattle",
    "miami", "chicago", "houston", "phoenix", "orlando", "detroit", "memphis", "nashville", "charlotte",
    "oakland", "san diego", "san jose", "fort worth", "milwaukee", "minneapolis", "indianapolis",
    "cleveland", "columbus", "tampa", "toronto", "montreal", "newark", "cincinnati", "long beach",
    "st. louis",
];
const DAYS: &[&str] = &["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"];
const MONTHS: &[&str] = &[
    "january", "february", "march", "april", "may", "june", "july", "august", "september", "october",
    "november", "december",
];
const DAY_NUMBERS: &[&str] = &[
    "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth",
    "twelfth", "fifteenth", "twentieth", "twenty first", "twenty second", "thirtieth",
];
const PERIODS: &[&str] = &["morning", "afternoon", "evening", "night", "early morning", "late evening"];
const AIRLINES: &[&str] = &[
    "united", "delta", "american airlines", "continental", "us air", "northwest", "twa", "alaska airlines",
    "southwest",
];
const CLASSES: &[&str] = &["first class", "economy", "business class", "coach"];
const TRIPS: &[&str] = &["round trip", "one way"];
const COSTS: &[&str] = &["cheapest", "lowest", "least expensive"];
const AIRCRAFT: &[&str] = &["boeing seven forty seven", "dc ten", "md eighty", "seven thirty seven", "airbus"];
const TRANSPORT: &[&str] = &["limousine", "taxi", "rental car", "bus", "shuttle"];

/// Placeholder name, slot label and filler pool.
const SLOTS: &[(&str, &str, &[&str])] = &[
    ("from", "fromloc.city_name", CITIES),
    ("to", "toloc.city_name", CITIES),
    ("city", "city_name", CITIES),
    ("day", "depart_date.day_name", DAYS),
    ("month", "depart_date.month_name", MONTHS),
    ("dnum", "depart_date.day_number", DAY_NUMBERS),
    ("period", "depart_time.period_of_day", PERIODS),
    ("airline", "airline_name", AIRLINES),
    ("class", "class_type", CLASSES),
    ("trip", "round_trip", TRIPS),
    ("cost", "cost_relative", COSTS),
    ("aircraft", "aircraft_code", AIRCRAFT),
    ("transport", "transport_type", TRANSPORT),
];

const TEMPLATES: &[(&str, &[&str])] = &[
    (
        "flight",
        &[
            "show me flights from {from} to {to}",
            "i want to fly from {from} to {to} on {day}",
            "i would like a {trip} flight from {from} to {to}",
            "list {airline} flights from {from} to {to} in the {period}",
            "what flights leave {from} on {month} {dnum} going to {to}",
            "please find a flight to {to} from {from} {day} {period}",
            "i need a {class} ticket on a flight from {from} to {to}",
            "are there any nonstop flights between {from} and {to}",
            "give me the {cost} flight from {from} to {to} on {day}",
            "which flights go from {from} to {to} and stop in {city}",
        ],
    ),
    (
        "airfare",
        &[
            "how much is a {trip} ticket from {from} to {to}",
            "what is the {cost} fare from {from} to {to}",
            "show me the fares for {class} from {from} to {to}",
            "what does a flight on {airline} from {from} to {to} cost",
            "list the {cost} {trip} fares to {to}",
            "i want the price of a {class} seat from {from} to {to} on {day}",
        ],
    ),
    (
        "flight_time",
        &[
            "what time does the {period} flight from {from} arrive in {to}",
            "when does {airline} leave {from} for {to}",
            "show me departure times from {from} to {to} on {day}",
            "what are the arrival times for flights to {to} on {month} {dnum}",
            "at what time do flights depart {from} in the {period}",
        ],
    ),
    (
        "airline",
        &[
            "which airlines fly from {from} to {to}",
            "what airline serves {city}",
            "show me the airlines with flights to {to} on {day}",
            "which airlines have {class} service from {from} to {to}",
            "list airlines that fly the {aircraft} into {to}",
        ],
    ),
    (
        "ground_service",
        &[
            "what ground transportation is available in {city}",
            "is there a {transport} from the airport to downtown {city}",
            "show me {transport} service in {city}",
            "how do i get from the {city} airport to downtown",
            "i need a {transport} in {city} on {day} {period}",
        ],
    ),
    (
        "distance",
        &[
            "how far is the airport from downtown {city}",
            "what is the distance from {from} to {to}",
            "how many miles is it from {from} to {to}",
            "how long is the flight from {from} to {to}",
        ],
    ),
    (
        "capacity",
        &[
            "how many passengers can a {aircraft} hold",
            "what is the seating capacity of the {aircraft}",
            "how many seats are on the {airline} {aircraft}",
            "show me the capacity of planes flying to {to}",
        ],
    ),
];

fn slot(name: &str) -> (&'static str, &'static [&'static str]) {
    let (_, label, pool) = SLOTS
        .iter()
        .find(|(n, _, _)| *n == name)
        .unwrap_or_else(|| panic!("template placeholder {{{name}}} has no slot"));
    (label, pool)
}

/// Draws one tagged utterance. Origin and destination always differ.
pub fn generate_utterance(rng: &mut Rng) -> TaggedUtterance {
    let (intent, templates) = TEMPLATES.choose(rng).expect("templates");
    let template = templates.choose(rng).expect("template");
    let mut tokens = Vec::new();
    let mut tags = Vec::new();
    let mut cities: Vec<&str> = Vec::new();
    for piece in template.split(' ') {
        match piece.strip_prefix('{').and_then(|p| p.strip_suffix('}')) {
            Some(name) => {
                let (label, pool) = slot(name);
                let value = loop {
                    let v = *pool.choose(rng).expect("pool");
                    if pool != CITIES || !cities.contains(&v) {
                        break v;
                    }
                };
                if pool == CITIES {
                    cities.push(value);
                }
                for (k, w) in value.split(' ').enumerate() {
                    tokens.push(w.to_string());
                    tags.push(format!("{}-{label}", if k == 0 { 'B' } else { 'I' }));
                }
            }
            None => {
                tokens.push(piece.to_string());
                tags.push("O".to_string());
            }
        }
    }
    TaggedUtterance::new(tokens, tags, *intent).expect("grammar emits valid IOB")
}

pub fn generate_dataset(rng: &mut Rng, n: usize) -> SluDataset {
    SluDataset::new((0..n).map(|_| generate_utterance(rng)).collect())
}

/// Train, validation and test sets from independent streams of `seed`.
pub fn generate_task(seed: u64, sizes: [usize; 3]) -> [SluDataset; 3] {
    [0u64, 1, 2].map(|k| generate_dataset(&mut derived_rng(seed, k), sizes[k as usize]))
}

/// Unlabeled sentences, one per line.
pub fn generate_corpus(rng: &mut Rng, n: usize) -> String {
    let mut s = String::new();
    for _ in 0..n {
        let u = generate_utterance(rng);
        // Occasional politeness prefix so the text is not a strict subset of
        // the task templates.
        if rng.random_bool(0.1) {
            s.push_str("please ");
        }
        s.push_str(&u.tokens.join(" "));
        s.push('\n');
    }
    s
}

/// Train and validation text from independent streams of `seed`.
pub fn generate_text_split(seed: u64, sizes: [usize; 2]) -> [String; 2] {
    [0u64, 1].map(|k| generate_corpus(&mut derived_rng(seed, k), sizes[k as usize]))
}

pub fn intents() -> Vec<&'static str> {
    TEMPLATES.iter().map(|(i, _)| *i).collect()
}

pub fn slot_labels() -> Vec<&'static str> {
    SLOTS.iter().map(|(_, l, _)| *l).collect()
}

/// The files shipped in `data/`, embedded at compile time.
pub mod bundled {
    pub const TOY_TRAIN: &str = include_str!("../data/toy_train.txt");
    pub const TOY_VAL: &str = include_str!("../data/toy_val.txt");
    pub const PRETRAIN_TRAIN: &str = include_str!("../data/pretrain_train.txt");
    pub const PRETRAIN_VAL: &str = include_str!("../data/pretrain_val.txt");
    pub const SLU_TRAIN: &str = include_str!("../data/slu_train.tsv");
    pub const SLU_VAL: &str = include_str!("../data/slu_val.tsv");
    pub const SLU_TEST: &str = include_str!("../data/slu_test.tsv");

    /// `(file name, contents)` of every bundled file.
    pub const FILES: [(&str, &str); 7] = [
        ("toy_train.txt", TOY_TRAIN),
        ("toy_val.txt", TOY_VAL),
        ("pretrain_train.txt", PRETRAIN_TRAIN),
        ("pretrain_val.txt", PRETRAIN_VAL),
        ("slu_train.tsv", SLU_TRAIN),
        ("slu_val.tsv", SLU_VAL),
        ("slu_test.tsv", SLU_TEST),
    ];
}

/// Regenerates the contents of every bundled file, in [`bundled::FILES`] order.
pub fn regenerate_bundled() -> Vec<(&'static str, String)> {
    let [toy_train, toy_val] = generate_text_split(TOY_SEED, TOY_SPLIT);
    let [pre_train, pre_val] = generate_text_split(PRETRAIN_SEED, PRETRAIN_SPLIT);
    let [slu_train, slu_val, slu_test] = generate_task(TASK_SEED, BUNDLED_SPLIT);
    vec![
        ("toy_train.txt", toy_train),
        ("toy_val.txt", toy_val),
        ("pretrain_train.txt", pre_train),
        ("pretrain_val.txt", pre_val),
        ("slu_train.tsv", slu_train.to_file_string()),
        ("slu_val.tsv", slu_val.to_file_string()),
        ("slu_test.tsv", slu_test.to_file_string()),
    ]
}

/// Parsed bundled task: train, validation, test.
pub fn bundled_task() -> Result<[SluDataset; 3]> {
    Ok([
        SluDataset::parse(bundled::SLU_TRAIN, "slu_train.tsv")?,
        SluDataset::parse(bundled::SLU_VAL, "slu_val.tsv")?,
        SluDataset::parse(bundled::SLU_TEST, "slu_test.tsv")?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use std::collections::BTreeSet;

    #[test]
    fn bundled_files_match_generator() {
        for ((name, text), (gname, gen)) in bundled::FILES.iter().zip(regenerate_bundled()) {
            assert_eq!(*name, gname);
            assert!(*text == gen, "{name} is stale; rerun the regenerate_data example");
        }
    }

    #[test]
    fn inventory_and_vocab_size() {
        assert!((6..=8).contains(&intents().len()));
        let text = generate_corpus(&mut seed::rng(0), 5000);
        let types: BTreeSet<&str> = text.split_whitespace().collect();
        assert!((180..=260).contains(&types.len()), "{}", types.len());
    }

    #[test]
    fn utterances_are_valid_and_cover_multi_token_slots() {
        let mut rng = seed::rng(1);
        let ds = generate_dataset(&mut rng, 500);
        assert!(ds.utterances.iter().any(|u| u.tags.iter().any(|t| t.starts_with("I-"))));
        for u in &ds.utterances {
            assert!(crate::slu::iob::is_valid(&u.tags));
            let from = u.tags.iter().position(|t| t == "B-fromloc.city_name");
            let to = u.tags.iter().position(|t| t == "B-toloc.city_name");
            if let (Some(a), Some(b)) = (from, to) {
                assert_ne!(u.tokens[a..].first(), None);
                let span = |s: usize| {
                    let mut e = s + 1;
                    while e < u.len() && u.tags[e].starts_with("I-") {
                        e += 1;
                    }
                    u.tokens[s..e].join(" ")
                };
                assert_ne!(span(a), span(b));
            }
        }
        let labels = crate::slu::SluLabels::from_datasets(&[&ds]).unwrap();
        assert_eq!(labels.intents.len(), intents().len());
    }
}
