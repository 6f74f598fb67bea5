#![allow(dead_code)]

use aidmine::ingest::{load_csv_str, Schema, UniformSeries};
use aidmine::resample::{build_regular_series, extract_day_segments, Frequency, QualifyBy, SegmentSet};
use aidmine::stats::{scale_segments, ScalingKind, ScalingScope};
use aidmine::synth::{generate, Archetype, Meal, SynthSpec, SynthTruth};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn archetype(name: &str, meals: &[(f64, f64)], nocturnal_rise: f64, basal_bg: f64) -> Archetype {
    Archetype {
        name: name.into(),
        meals: meals.iter().map(|&(hour, carbs)| Meal { hour, carbs }).collect(),
        nocturnal_rise,
        basal_bg,
    }
}

/// Regular eater versus late, dinner-heavy eater with a nocturnal BG rise.
pub fn two_archetypes() -> Vec<Archetype> {
    vec![
        Archetype::default(),
        archetype("late-dinner", &[(10.0, 30.0), (21.0, 120.0)], 40.0, 130.0),
    ]
}

/// One large meal at breakfast, lunch or dinner. The lunch meal is larger so
/// the three day shapes sit roughly equally far apart under DTW.
pub fn three_archetypes() -> Vec<Archetype> {
    vec![
        archetype("big-breakfast", &[(7.0, 120.0), (13.0, 30.0), (19.0, 30.0)], 0.0, 110.0),
        archetype("big-lunch", &[(7.0, 30.0), (13.0, 160.0), (19.0, 30.0)], 0.0, 110.0),
        archetype("big-dinner", &[(7.0, 30.0), (13.0, 30.0), (19.0, 120.0)], 0.0, 110.0),
    ]
}

/// `per_class` days of each archetype in a seeded random order.
pub fn shuffled_labels(classes: usize, per_class: usize, seed: u64) -> Vec<usize> {
    let mut labels: Vec<usize> = (0..classes).flat_map(|c| std::iter::repeat_n(c, per_class)).collect();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    labels
}

pub fn labelled_spec(archetypes: Vec<Archetype>, per_class: usize, seed: u64) -> SynthSpec {
    let day_labels = shuffled_labels(archetypes.len(), per_class, seed ^ 0x5eed);
    SynthSpec {
        seed,
        days: day_labels.len(),
        archetypes,
        day_labels,
        noise_std: 0.05,
        meal_jitter_minutes: 30.0,
        ..SynthSpec::default()
    }
}

/// Generated log after ingest.
pub fn ingest(spec: &SynthSpec) -> (UniformSeries, SynthTruth) {
    let out = generate(spec).expect("valid spec");
    let (series, _) = load_csv_str(&out.csv, &Schema::default(), "synth").expect("generated csv loads");
    (series, out.truth)
}

/// Min-max scaled day segments and the planted archetype of each.
pub fn day_segments(spec: &SynthSpec) -> (SegmentSet, Vec<usize>) {
    let (series, truth) = ingest(spec);
    let regular = build_regular_series(&series, Frequency::Hourly, QualifyBy::Bg);
    let set = extract_day_segments(&regular).expect("hourly series");
    let labels = set
        .segments
        .iter()
        .map(|s| truth.day_labels[(s.tag.date - truth.start).num_days() as usize])
        .collect();
    let (scaled, _) = scale_segments(&set, ScalingKind::Minmax, ScalingScope::Global).expect("scalable");
    (scaled, labels)
}
