#![allow(dead_code)]

use std::collections::HashSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparqlgen_core::pgn::PgnSample;

const ENTITIES: &[(&str, &str)] = &[
    ("wd:Q2084454", "Hamburg Eastern Railway"),
    ("wd:Q76", "Barack Obama"),
    ("wd:Q90", "Paris"),
    ("wd:Q64", "Berlin"),
    ("wd:Q513", "Mount Everest"),
    ("wd:Q3130", "Sydney"),
    ("wd:Q1741", "Vienna"),
    ("wd:Q3820", "Beijing"),
    ("wd:Q1489", "Mexico City"),
    ("wd:Q8678", "Rio de Janeiro"),
    ("wd:Q5826", "Volga"),
    ("wd:Q3392", "Ural River"),
    ("wd:Q1384", "New York"),
    ("wd:Q2807", "Madrid"),
    ("wd:Q220", "Rome"),
    ("wd:Q1085", "Prague"),
    ("wd:Q34370", "Lake Titicaca"),
    ("wd:Q5499", "Lake Baikal"),
    ("wd:Q9141", "Taj Mahal"),
    ("wd:Q243", "Eiffel Tower"),
    ("wd:Q12501", "Great Pyramid of Giza"),
    ("wd:Q1747689", "Ancient Rome"),
    ("wd:Q3766", "Nile"),
    ("wd:Q1653", "Danube"),
];

const RELATIONS: &[(&str, &str)] = &[
    ("wdt:P5066", "operating temperature"),
    ("wdt:P2044", "elevation above sea level"),
    ("wdt:P1082", "population"),
    ("wdt:P2046", "area"),
    ("wdt:P2043", "length"),
    ("wdt:P2048", "height"),
    ("wdt:P1128", "employees"),
    ("wdt:P2067", "mass"),
    ("wdt:P4511", "vertical depth"),
    ("wdt:P2225", "discharge"),
];

const TEMPLATES: &[&str] = &[
    "Is the {rel} of {ent} equal to {num}?",
    "Does {ent} have a {rel} of {num}?",
    "Is {num} the {rel} of {ent} ?",
    "Was the {rel} of {ent} {num}?",
    "Is it true that the {rel} of {ent} is {num} ?",
];

fn random_number(rng: &mut ChaCha8Rng) -> String {
    match rng.random_range(0..3) {
        0 => rng.random_range(1..100_000u32).to_string(),
        1 => format!("{}.{}", rng.random_range(0..1000u32), rng.random_range(1..10u32)),
        _ => format!("{}.{:02}", rng.random_range(0..100u32), rng.random_range(1..100u32)),
    }
}

/// Templated ASK questions whose numeric literal must be copied into the
/// query. Numbers in `exclude` are never drawn.
pub fn copy_task(n: usize, seed: u64, exclude: &HashSet<String>) -> (Vec<PgnSample>, HashSet<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut used = HashSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let num = random_number(&mut rng);
        if exclude.contains(&num) || used.contains(&num) {
            continue;
        }
        used.insert(num.clone());
        let (eiri, elab) = *ENTITIES.choose(&mut rng).unwrap();
        let (riri, rlab) = *RELATIONS.choose(&mut rng).unwrap();
        let question = TEMPLATES
            .choose(&mut rng)
            .unwrap()
            .replace("{rel}", rlab)
            .replace("{ent}", elab)
            .replace("{num}", &num);
        let input = format!("{question} [SEP] {eiri} {elab} [SEP] {riri} {rlab}");
        let target = format!("ASK WHERE {{ {eiri} {riri} ?var0 FILTER ( ?var0 = {num} ) }}");
        out.push(PgnSample::from_text(format!("copy-{seed}-{}", out.len()), &input, &target));
    }
    (out, used)
}
