//! Small templated corpora for smoke runs and tests.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::autodiff::SeedRng;
use crate::text::Triplet;

const PEOPLE: [&str; 8] = [
    "john smith",
    "mary jones",
    "ali khan",
    "li wei",
    "anna berg",
    "omar diaz",
    "sara cole",
    "ivan petrov",
];
const PLACES: [&str; 8] = [
    "paris", "lagos", "quito", "oslo", "hanoi", "lima", "cairo", "perth",
];
const YEARS: [&str; 8] = [
    "1821", "1850", "1877", "1902", "1919", "1934", "1966", "1988",
];
const ADJECTIVES: [&str; 5] = ["old", "royal", "central", "free", "grand"];
const NOUNS: [&str; 5] = ["library", "museum", "college", "theatre", "bank"];

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

/// Builds a triplet from a passage whose answer is the (single) occurrence
/// of `answer`.
fn triplet(passage: &str, answer: &str, question: &str) -> Triplet {
    let p = words(passage);
    let a = words(answer);
    let start = p
        .windows(a.len())
        .position(|w| w == a.as_slice())
        .expect("answer occurs in passage");
    Triplet {
        passage_tokens: p,
        answer_start: start,
        answer_end: start + a.len(),
        question_tokens: words(question),
        ner_tags: None,
    }
}

/// One "founded" example; `role` picks which slot is the answer.
fn founded(adj: &str, noun: &str, place: &str, person: &str, year: &str, role: usize) -> Triplet {
    let passage = format!("the {adj} {noun} of {place} was founded by {person} in {year} .");
    match role {
        0 => triplet(
            &passage,
            person,
            &format!("who founded the {adj} {noun} of {place} ?"),
        ),
        1 => triplet(
            &passage,
            year,
            &format!("when was the {adj} {noun} of {place} founded ?"),
        ),
        _ => triplet(
            &passage,
            place,
            &format!("which city has the {noun} founded by {person} in {year} ?"),
        ),
    }
}

const FIRST_NAMES: [&str; 8] = ["john", "mary", "ali", "li", "anna", "omar", "sara", "ivan"];
const LAST_NAMES: [&str; 8] = [
    "smith", "jones", "khan", "wei", "berg", "diaz", "cole", "petrov",
];

fn person<R: Rng>(rng: &mut R) -> String {
    format!(
        "{} {}",
        FIRST_NAMES.choose(rng).expect("nonempty"),
        LAST_NAMES.choose(rng).expect("nonempty")
    )
}

/// A passage naming two people, one of whom may be the answer, so the
/// question has to mention the right one.
fn two_people(
    adj: &str,
    noun: &str,
    place: &str,
    p1: &str,
    p2: &str,
    year: &str,
    role: usize,
) -> Triplet {
    let passage = format!(
        "the {adj} {noun} of {place} was founded by {p1} and later led by {p2} from {year} ."
    );
    match role {
        0 => triplet(
            &passage,
            p1,
            &format!("who founded the {noun} of {place} later led by {p2} ?"),
        ),
        1 => triplet(
            &passage,
            p2,
            &format!("who led the {noun} of {place} founded by {p1} ?"),
        ),
        2 => triplet(
            &passage,
            year,
            &format!("when did {p2} start to lead the {noun} of {place} ?"),
        ),
        _ => triplet(
            &passage,
            place,
            &format!("which city has the {adj} {noun} founded by {p1} ?"),
        ),
    }
}

/// `n` examples drawn from a two-person template with first and last names
/// sampled independently. Gold questions never repeat the answer.
pub fn templated_corpus(n: usize, seed: u64) -> Vec<Triplet> {
    let mut rng = SeedRng::new(seed);
    (0..n)
        .map(|_| {
            let p1 = person(&mut rng);
            let mut p2 = person(&mut rng);
            while p2.split(' ').any(|w| p1.split(' ').any(|v| v == w)) {
                p2 = person(&mut rng);
            }
            two_people(
                ADJECTIVES.choose(&mut rng).expect("nonempty"),
                NOUNS.choose(&mut rng).expect("nonempty"),
                PLACES.choose(&mut rng).expect("nonempty"),
                &p1,
                &p2,
                YEARS.choose(&mut rng).expect("nonempty"),
                rng.gen_range(0..4),
            )
        })
        .collect()
}

/// 32 fixed examples with pairwise distinct questions: every person, place
/// and year appears, each of the three question forms is used.
pub fn toy_corpus() -> Vec<Triplet> {
    (0..32)
        .map(|i| {
            founded(
                ADJECTIVES[i % 5],
                NOUNS[(i * 2) % 5],
                PLACES[i % 8],
                PEOPLE[(i * 3) % 8],
                YEARS[(i + 1) % 8],
                i % 3,
            )
        })
        .collect()
}
