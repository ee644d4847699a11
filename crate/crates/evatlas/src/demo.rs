//! Seeded generator for the synthetic demo corpus: 120 studies on
//! pedagogical agents, eight latent themes, five coded facets.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DEMO_SEED: u64 = 2026;
pub const DEMO_SIZE: usize = 120;

/// The committed copy of [`demo_csv`] at [`DEMO_SEED`].
pub const DEMO_CSV: &str = include_str!("../data/demo.csv");

pub const HEADER: [&str; 10] = [
    "id",
    "title",
    "authors",
    "year",
    "abstract",
    "Learning Topic",
    "Agent Type",
    "Grade Level",
    "Agent Role",
    "Study Purpose",
];

struct Theme {
    title: &'static [&'static str],
    terms: &'static [&'static str],
    role: Option<&'static str>,
    size: usize,
}

const THEMES: [Theme; 8] = [
    Theme {
        title: &["Immersive virtual reality", "Presence in simulated laboratories", "Embodied agents in 3D worlds"],
        terms: &[
            "virtual reality", "immersive headset", "presence", "embodiment", "spatial navigation",
            "simulated laboratory", "head-mounted display", "three-dimensional environment",
        ],
        role: None,
        size: 22,
    },
    Theme {
        title: &["Agent appearance and realism", "Voice and gesture design", "Anthropomorphic persona design"],
        terms: &[
            "appearance", "visual realism", "gender", "facial expression", "voice quality",
            "anthropomorphism", "gesture", "persona design",
        ],
        role: None,
        size: 19,
    },
    Theme {
        title: &["Adaptive scaffolding", "Metacognitive prompts and hints", "Feedback during problem solving"],
        terms: &[
            "scaffolding", "hints", "adaptive feedback", "metacognitive prompts", "self-regulation",
            "worked examples", "problem solving", "fading",
        ],
        role: Some("coaching/scaffolding"),
        size: 17,
    },
    Theme {
        title: &["Motivation and emotion", "Affective support", "Self-efficacy and enjoyment"],
        terms: &[
            "motivation", "emotion", "affective support", "engagement", "situational interest",
            "self-efficacy", "anxiety", "enjoyment",
        ],
        role: Some("motivator"),
        size: 15,
    },
    Theme {
        title: &["Learning by teaching", "Teachable agents", "The protege effect"],
        terms: &[
            "teachable agent", "teaching", "tutee", "explanation", "protege effect",
            "responsibility", "peer tutoring", "knowledge building",
        ],
        role: Some("tutee"),
        size: 14,
    },
    Theme {
        title: &["Natural language dialogue", "Conversational tutoring", "Chatbot question answering"],
        terms: &[
            "dialogue", "natural language", "chatbot", "conversation", "turn taking",
            "speech recognition", "question answering", "discourse",
        ],
        role: None,
        size: 12,
    },
    Theme {
        title: &["Collaboration with agent companions", "Social presence and rapport", "Trust in agent teammates"],
        terms: &[
            "collaboration", "group work", "social presence", "rapport", "trust",
            "relationship", "teammate", "companion",
        ],
        role: Some("co-learner"),
        size: 11,
    },
    Theme {
        title: &["Assessment and learning analytics", "Knowledge tracing", "Retention and transfer"],
        terms: &[
            "assessment", "analytics", "log data", "performance prediction", "knowledge tracing",
            "test scores", "retention", "transfer",
        ],
        role: Some("information source"),
        size: 10,
    },
];

const LEARNING_TOPICS: [&str; 6] = [
    "science",
    "mathematics",
    "language",
    "social skills",
    "reading",
    "programming",
];
const OTHER_ROLES: [&str; 4] = ["coaching/scaffolding", "information source", "co-learner", "motivator"];
const SURNAMES: [&str; 16] = [
    "Lee", "Garcia", "Chen", "Okafor", "Schmidt", "Nakamura", "Silva", "Novak",
    "Haddad", "Kim", "Moreau", "Patel", "Johansson", "Rossi", "Kowalski", "Mensah",
];
const INITIALS: [&str; 8] = ["A.", "B.", "C.", "D.", "J.", "K.", "M.", "S."];
const SETTINGS: [&str; 4] = ["classroom", "school club", "web-based course", "laboratory session"];
const METHODS: [&str; 3] = ["randomized trial", "pre-post comparison", "mixed-methods design"];

/// Generates the demo corpus as CSV text.
pub fn demo_csv(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut themes: Vec<usize> = THEMES
        .iter()
        .enumerate()
        .flat_map(|(i, t)| std::iter::repeat_n(i, t.size))
        .collect();
    debug_assert_eq!(themes.len(), DEMO_SIZE);
    // Interleave themes so ids carry no topic signal.
    for i in (1..themes.len()).rev() {
        let j = rng.random_range(0..=i);
        themes.swap(i, j);
    }

    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(HEADER).expect("write to memory");
    for (i, &t) in themes.iter().enumerate() {
        let row = study_row(i + 1, &THEMES[t], &mut rng);
        out.write_record(&row).expect("write to memory");
    }
    String::from_utf8(out.into_inner().expect("flush to memory")).expect("utf-8 input")
}

fn pick<'a>(rng: &mut ChaCha8Rng, items: &[&'a str]) -> &'a str {
    items.choose(rng).copied().expect("non-empty list")
}

fn study_row(n: usize, theme: &Theme, rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut terms: Vec<&str> = theme.terms.to_vec();
    for i in (1..terms.len()).rev() {
        let j = rng.random_range(0..=i);
        terms.swap(i, j);
    }

    let topic_a = pick(rng, &LEARNING_TOPICS);
    let setting = pick(rng, &SETTINGS);
    let title = format!("{}: {} in {} education", pick(rng, theme.title), terms[0], topic_a);

    let abstract_text = format!(
        "This study examined how {} and {} shape learning when students work with a pedagogical agent. \
         We report a {} with {} participants in a {}. \
         Results indicate that {} improved {}, while {} showed mixed effects. \
         Implications for {} and {} in agent-based learning environments are discussed.",
        terms[0],
        terms[1],
        pick(rng, &METHODS),
        rng.random_range(24..=240),
        setting,
        terms[2],
        terms[3],
        terms[4],
        terms[5],
        terms[6],
    );

    let authors: Vec<String> = (0..rng.random_range(1..=3))
        .map(|_| format!("{}, {}", pick(rng, &SURNAMES), pick(rng, &INITIALS)))
        .collect();

    let year = match rng.random_range(0..100) {
        0..15 => rng.random_range(2003..=2009),
        15..50 => rng.random_range(2010..=2016),
        _ => rng.random_range(2017..=2023),
    };

    let mut topics = vec![topic_a];
    if rng.random_bool(0.3) {
        let b = pick(rng, &LEARNING_TOPICS);
        if b != topic_a {
            topics.push(b);
        }
    }

    let agent_type = match rng.random_range(0..100) {
        0..60 => "Pedagogical",
        60..85 => "Conversational",
        _ => "Multiple roles",
    };
    let upper_share = if agent_type == "Conversational" { 0.1 } else { 0.33 };
    let grade = if rng.random_bool(upper_share) {
        "upper secondary"
    } else if rng.random_bool(0.5) {
        "primary"
    } else {
        "lower secondary"
    };
    let role = match theme.role {
        Some(r) if rng.random_bool(0.8) => r,
        _ => pick(rng, &OTHER_ROLES),
    };
    let purpose = match rng.random_range(0..100) {
        0..55 => "experiment",
        55..80 => "quasi-experiment",
        _ => "feasibility/usability",
    };

    vec![
        format!("S{n:03}"),
        title,
        authors.join("; "),
        year.to_string(),
        abstract_text,
        topics.join("; "),
        agent_type.into(),
        grade.into(),
        role.into(),
        purpose.into(),
    ]
}
