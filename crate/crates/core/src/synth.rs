//! Templated generator of trial abstracts with exact gold annotations.
//!
//! Each abstract has a background sentence, an objective, a methods
//! sentence naming every arm, an outcome list, filler sentences and one
//! result sentence per (arm, outcome) pair, plus a conclusion. Some result
//! sentences use a lexical-inversion template ("pain improved") whose
//! direction depends on whether the outcome is desirable; those are listed
//! as hard cases.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotatedDocument, Direction, Document, Entity, EntityType, Mention, RelationTuple, Span};
use crate::error::{Error, Result};
use crate::supervision::Prompt;
use crate::text::tokenize;

const INTERVENTIONS: &[(&str, &str)] = &[
    ("aspirin", "aspirin 100 mg daily"),
    ("metformin", "metformin 500 mg twice daily"),
    ("erythromycin", "erythromycin 333 mg three times daily"),
    ("vitamin D", "vitamin D 1000 IU daily"),
    ("acupuncture", "acupuncture sessions"),
    ("exercise training", "supervised exercise training"),
    ("probiotics", "oral probiotics"),
    ("zinc", "zinc 20 mg daily"),
    ("melatonin", "melatonin 3 mg nightly"),
    ("omeprazole", "omeprazole 20 mg daily"),
    ("ibuprofen", "ibuprofen 400 mg"),
    ("dexamethasone", "dexamethasone 8 mg"),
    ("ketamine", "low-dose ketamine"),
    ("cognitive therapy", "cognitive behavioural therapy"),
    ("lidocaine", "lidocaine infusion"),
    ("magnesium sulfate", "intravenous magnesium sulfate"),
    ("simvastatin", "simvastatin 40 mg daily"),
    ("insulin glargine", "insulin glargine once daily"),
    ("iron supplementation", "oral iron supplementation"),
    ("oseltamivir", "oseltamivir 75 mg twice daily"),
    ("tranexamic acid", "tranexamic acid 1 g"),
    ("yoga", "weekly yoga classes"),
    ("folic acid", "folic acid 5 mg daily"),
    ("nicotine patches", "transdermal nicotine patches"),
    ("sertraline", "sertraline 50 mg daily"),
    ("montelukast", "montelukast 10 mg"),
    ("chlorhexidine", "chlorhexidine mouthwash"),
    ("ondansetron", "ondansetron 4 mg"),
];

const COMPARATORS: &[(&str, &str)] = &[
    ("placebo", "identical placebo"),
    ("placebo", "matching placebo"),
    ("saline", "normal saline"),
    ("usual care", "usual care alone"),
    ("sham acupuncture", "sham acupuncture sessions"),
    ("standard therapy", "standard therapy alone"),
    ("no treatment", "no treatment"),
];

/// Outcome surface and whether a higher value is desirable.
const OUTCOMES: &[(&str, bool)] = &[
    ("quality of life", true),
    ("pain relief", true),
    ("exercise capacity", true),
    ("bone mineral density", true),
    ("remission rate", true),
    ("sleep duration", true),
    ("HDL cholesterol", true),
    ("wound healing", true),
    ("walking distance", true),
    ("mortality", false),
    ("pain scores", false),
    ("nausea", false),
    ("preterm delivery", false),
    ("hospital stay", false),
    ("adverse events", false),
    ("blood pressure", false),
    ("HbA1c", false),
    ("headache duration", false),
    ("infection rate", false),
    ("low birth weight", false),
    ("LDL cholesterol", false),
    ("fatigue", false),
    ("anxiety symptoms", false),
    ("postoperative vomiting", false),
];

const CONDITIONS: &[&str] = &[
    "type 2 diabetes",
    "chronic low back pain",
    "asthma",
    "major depression",
    "heart failure",
    "osteoarthritis",
    "insomnia",
    "influenza",
    "gestational anaemia",
    "migraine",
];

const POPULATIONS: &[&str] = &[
    "adults",
    "older adults",
    "pregnant women",
    "children",
    "outpatients",
    "surgical patients",
    "smokers",
    "nursing home residents",
];

const BACKGROUND: &[&str] = &[
    "{COND} is a leading cause of morbidity among {POP}.",
    "Few trials have evaluated treatments for {COND} in {POP}.",
    "The management of {COND} in {POP} remains uncertain.",
];

const OBJECTIVE: &[&str] = &[
    "We evaluated whether {I} improves outcomes in {POP} with {COND}.",
    "This trial compared {I} with {C} in {POP} with {COND}.",
    "We aimed to assess the efficacy of {I} for {COND}.",
];

const METHODS_TWO: &[&str] = &[
    "In this randomized trial, {N} {POP} were assigned to {IF} or {CF}.",
    "A total of {N} {POP} were randomized to receive {IF} or {CF}.",
];

const METHODS_THREE: &[&str] = &[
    "In this randomized trial, {N} {POP} were assigned to {IF}, {JF} or {CF}.",
    "A total of {N} {POP} were randomized to {IF}, {JF} or {CF}.",
];

const FILLER: &[&str] = &[
    "Baseline characteristics were similar between the groups.",
    "Adherence was high in both groups.",
    "Follow-up was completed by {PCT}% of participants.",
    "{O} was assessed at baseline and after {W} weeks.",
];

const CONCLUSION: &[&str] = &[
    "{I} may be considered for {POP} with {COND}.",
    "Further trials of {I} in {POP} are warranted.",
    "These findings inform the use of {I} in routine practice.",
];

const INCREASED: &[&str] = &[
    "{O} was significantly higher in the {I} group than in the {C} group ({A}% vs. {B}%, P {P}).",
    "Compared with {C}, {I} significantly increased {O} (P {P}).",
    "{I} resulted in a greater {O} than {C} ({A} vs. {B}, P {P}).",
    "Treatment with {I} led to a significant increase in {O} compared with {C}.",
    "{O} increased more with {I} than with {C} (P {P}).",
];

const DECREASED: &[&str] = &[
    "{I} significantly reduced {O} compared with {C} ({A}% vs. {B}%, P {P}).",
    "{O} was significantly lower in the {I} group than in the {C} group.",
    "Compared with {C}, {I} decreased {O} (P {P}).",
    "Treatment with {I} led to a significant reduction in {O} compared with {C}.",
    "{O} fell more with {I} than with {C} (P {P}).",
];

const NO_DIFFERENCE: &[&str] = &[
    "There was no significant difference in {O} between the {I} and {C} groups (P = {PN}).",
    "{I} had little impact on reducing {O} ({A}% vs. {B}%, P = {PN}).",
    "{O} did not differ significantly between {I} and {C} (P = {PN}).",
    "Compared with {C}, {I} did not significantly change {O}.",
];

/// Only valid with two arms: the sentence names no arm.
const NO_DIFFERENCE_IMPLICIT: &[&str] = &["{O} was similar in both groups (P = {PN})."];

const PAIRED: &[(&str, Direction)] = &[
    ("{I} had little impact on reducing {O} ({A}% vs. {B}%, P = {PN}) or {O2} ({A2}% vs. {B2}%, P = {PN2}).", Direction::NoDifference),
    ("{I} significantly reduced {O} and {O2} compared with {C}.", Direction::Decreased),
    ("Compared with {C}, {I} significantly increased {O} and {O2}.", Direction::Increased),
];

/// Direction follows outcome polarity: `true` templates report an
/// improvement, `false` a deterioration.
const INVERTED: &[(&str, bool)] = &[
    ("{O} improved significantly in the {I} group compared with the {C} group.", true),
    ("{I} produced a marked improvement in {O} versus {C}.", true),
    ("{O} worsened in the {I} group compared with the {C} group.", false),
];

const SIGNIFICANT_P: &[&str] = &["< 0.001", "= 0.002", "= 0.01", "= 0.03", "< 0.01", "= 0.004"];
const NULL_P: &[&str] = &["0.4", "0.7", "0.62", "0.28", "0.91", "0.15", "0.53"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub num_docs: usize,
    #[serde(default)]
    pub seed: u64,
    /// Probability that a result sentence uses a lexical-inversion template.
    #[serde(default = "default_hard_fraction")]
    pub hard_fraction: f64,
    /// Probability of a second active arm.
    #[serde(default = "default_three_arm_fraction")]
    pub three_arm_fraction: f64,
}

fn default_hard_fraction() -> f64 {
    0.1
}

fn default_three_arm_fraction() -> f64 {
    0.2
}

impl SynthConfig {
    pub fn new(num_docs: usize, seed: u64) -> SynthConfig {
        SynthConfig {
            num_docs,
            seed,
            hard_fraction: default_hard_fraction(),
            three_arm_fraction: default_three_arm_fraction(),
        }
    }
}

/// A relation produced from a lexical-inversion template.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardCase {
    pub doc_id: String,
    pub evidence: usize,
    pub outcome: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub docs: Vec<AnnotatedDocument>,
    pub prompts: Vec<Prompt>,
    pub hard_cases: Vec<HardCase>,
}

/// A sentence under construction: text plus character spans of mentions,
/// keyed by entity id.
struct SentenceBuilder {
    text: String,
    mentions: Vec<(usize, usize, String)>,
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) if f.is_lowercase() => f.to_uppercase().chain(c).collect(),
        Some(f) => std::iter::once(f).chain(c).collect(),
        None => String::new(),
    }
}

/// Fills `{KEY}` slots. Slots bound in `mentions` are recorded as mentions
/// of the mapped entity.
fn fill(template: &str, mentions: &BTreeMap<&str, (String, String)>, values: &BTreeMap<&str, String>) -> Result<SentenceBuilder> {
    let mut out = SentenceBuilder {
        text: String::new(),
        mentions: Vec::new(),
    };
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.text.push_str(&rest[..open]);
        let close = rest[open..]
            .find('}')
            .map(|c| open + c)
            .ok_or_else(|| Error::input(format!("unclosed slot in template {template:?}")))?;
        let key = &rest[open + 1..close];
        let at_start = out.text.is_empty();
        if let Some((surface, entity)) = mentions.get(key) {
            let surface = if at_start { capitalize(surface) } else { surface.clone() };
            let start = out.text.chars().count();
            out.text.push_str(&surface);
            out.mentions.push((start, start + surface.chars().count(), entity.clone()));
        } else if let Some(v) = values.get(key) {
            out.text.push_str(&if at_start { capitalize(v) } else { v.clone() });
        } else {
            return Err(Error::input(format!("unbound slot {key} in template {template:?}")));
        }
        rest = &rest[close + 1..];
    }
    out.text.push_str(rest);
    Ok(out)
}

struct Arm {
    id: String,
    short: String,
    full: String,
}

struct Outcome {
    id: String,
    surface: String,
    desirable: bool,
}

struct PlannedRelation {
    arm: usize,
    outcome: usize,
    direction: Direction,
    sentence: usize,
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T]) -> &'a T {
    items.choose(rng).expect("non-empty vocabulary")
}

fn generate_doc(doc_id: &str, rng: &mut ChaCha8Rng, config: &SynthConfig) -> Result<(AnnotatedDocument, Vec<Prompt>, Vec<HardCase>)> {
    let three_arm = rng.gen_bool(config.three_arm_fraction);
    let num_arms = if three_arm { 2 } else { 1 };
    let chosen: Vec<&(&str, &str)> = INTERVENTIONS.choose_multiple(rng, num_arms).collect();
    let mut arms: Vec<Arm> = chosen
        .iter()
        .enumerate()
        .map(|(k, (s, f))| Arm {
            id: format!("I{}", k + 1),
            short: s.to_string(),
            full: f.to_string(),
        })
        .collect();
    let (cs, cf) = pick(rng, COMPARATORS);
    arms.push(Arm {
        id: "C".into(),
        short: cs.to_string(),
        full: cf.to_string(),
    });
    let comparator = arms.len() - 1;

    let num_outcomes = if three_arm {
        rng.gen_range(1..=2)
    } else {
        *pick(rng, &[1usize, 2, 2, 3, 3])
    };
    let outcomes: Vec<Outcome> = OUTCOMES
        .choose_multiple(rng, num_outcomes)
        .enumerate()
        .map(|(k, (s, d))| Outcome {
            id: format!("O{}", k + 1),
            surface: s.to_string(),
            desirable: *d,
        })
        .collect();

    let mut values: BTreeMap<&str, String> = BTreeMap::new();
    values.insert("COND", pick(rng, CONDITIONS).to_string());
    values.insert("POP", pick(rng, POPULATIONS).to_string());
    values.insert("N", rng.gen_range(40..900).to_string());
    values.insert("W", (4 * rng.gen_range(1..13)).to_string());
    values.insert("PCT", rng.gen_range(80..99).to_string());

    let arm_slots = |main: usize| -> BTreeMap<&str, (String, String)> {
        let mut m = BTreeMap::new();
        m.insert("I", (arms[main].short.clone(), arms[main].id.clone()));
        m.insert("C", (arms[comparator].short.clone(), arms[comparator].id.clone()));
        m.insert("IF", (arms[0].full.clone(), arms[0].id.clone()));
        m.insert("CF", (arms[comparator].full.clone(), arms[comparator].id.clone()));
        if three_arm {
            m.insert("JF", (arms[1].full.clone(), arms[1].id.clone()));
        }
        m
    };

    let mut sentences: Vec<SentenceBuilder> = Vec::new();
    sentences.push(fill(pick(rng, BACKGROUND), &BTreeMap::new(), &values)?);
    sentences.push(fill(pick(rng, OBJECTIVE), &arm_slots(0), &values)?);
    let methods = if three_arm { METHODS_THREE } else { METHODS_TWO };
    sentences.push(fill(pick(rng, methods), &arm_slots(0), &values)?);

    let mut outcome_slots: BTreeMap<&str, (String, String)> = BTreeMap::new();
    let list_keys = ["O", "O2", "O3"];
    for (k, o) in outcomes.iter().enumerate() {
        outcome_slots.insert(list_keys[k], (o.surface.clone(), o.id.clone()));
    }
    let outcome_list = match outcomes.len() {
        1 => "The primary outcome was {O}.",
        2 => "The primary outcome was {O}; the secondary outcome was {O2}.",
        _ => "The primary outcome was {O}; secondary outcomes were {O2} and {O3}.",
    };
    sentences.push(fill(outcome_list, &outcome_slots, &values)?);

    let num_fillers = rng.gen_range(1..=2);
    let mut fillers: Vec<&str> = FILLER.choose_multiple(rng, num_fillers).copied().collect();
    fillers.sort();
    for f in fillers {
        let mut slots = BTreeMap::new();
        let o = pick(rng, &outcomes);
        slots.insert("O", (o.surface.clone(), o.id.clone()));
        sentences.push(fill(f, &slots, &values)?);
    }

    // result sentences
    let mut planned: Vec<PlannedRelation> = Vec::new();
    let mut hard: Vec<(usize, usize)> = Vec::new();
    let mut pending: Vec<(usize, usize)> = (0..comparator)
        .flat_map(|a| (0..outcomes.len()).map(move |o| (a, o)))
        .collect();
    pending.shuffle(rng);
    while let Some((arm, o)) = pending.pop() {
        let sentence = sentences.len();
        let mut slots = arm_slots(arm);
        slots.insert("O", (outcomes[o].surface.clone(), outcomes[o].id.clone()));
        let mut v = values.clone();
        v.insert("A", rng.gen_range(5..60).to_string());
        v.insert("B", rng.gen_range(5..60).to_string());
        v.insert("A2", rng.gen_range(5..60).to_string());
        v.insert("B2", rng.gen_range(5..60).to_string());
        v.insert("P", pick(rng, SIGNIFICANT_P).to_string());
        v.insert("PN", pick(rng, NULL_P).to_string());
        v.insert("PN2", pick(rng, NULL_P).to_string());

        // a second outcome for the same arm may share the sentence
        let partner = pending.iter().position(|&(a, _)| a == arm);
        if let Some(p) = partner.filter(|_| rng.gen_bool(0.2)) {
            let (_, o2) = pending.remove(p);
            let (template, direction) = *pick(rng, PAIRED);
            slots.insert("O2", (outcomes[o2].surface.clone(), outcomes[o2].id.clone()));
            sentences.push(fill(template, &slots, &v)?);
            for oo in [o, o2] {
                planned.push(PlannedRelation {
                    arm,
                    outcome: oo,
                    direction,
                    sentence,
                });
            }
            continue;
        }

        let direction;
        let template;
        if rng.gen_bool(config.hard_fraction) {
            let (t, improvement) = *pick(rng, INVERTED);
            template = t;
            direction = if improvement == outcomes[o].desirable {
                Direction::Increased
            } else {
                Direction::Decreased
            };
            hard.push((sentence, o));
        } else {
            direction = *pick(rng, &Direction::ALL);
            let pool: Vec<&str> = match direction {
                Direction::Increased => INCREASED.to_vec(),
                Direction::Decreased => DECREASED.to_vec(),
                Direction::NoDifference if !three_arm => NO_DIFFERENCE.iter().chain(NO_DIFFERENCE_IMPLICIT).copied().collect(),
                Direction::NoDifference => NO_DIFFERENCE.to_vec(),
            };
            template = pick(rng, &pool);
        }
        sentences.push(fill(template, &slots, &v)?);
        planned.push(PlannedRelation {
            arm,
            outcome: o,
            direction,
            sentence,
        });
    }
    sentences.push(fill(pick(rng, CONCLUSION), &arm_slots(0), &values)?);

    assemble(doc_id, &sentences, &arms, comparator, &outcomes, &planned, &hard)
}

fn assemble(
    doc_id: &str,
    sentences: &[SentenceBuilder],
    arms: &[Arm],
    comparator: usize,
    outcomes: &[Outcome],
    planned: &[PlannedRelation],
    hard: &[(usize, usize)],
) -> Result<(AnnotatedDocument, Vec<Prompt>, Vec<HardCase>)> {
    let mut text = String::new();
    let mut offsets: Vec<(usize, usize)> = Vec::new();
    let mut ranges = Vec::new();
    let mut sentence_chars = Vec::new();
    let mut char_mentions: Vec<(usize, usize, &str)> = Vec::new();
    for s in sentences {
        if !text.is_empty() {
            text.push(' ');
        }
        let base = text.chars().count();
        let first = offsets.len();
        offsets.extend(tokenize(&s.text).into_iter().map(|(a, b)| (a + base, b + base)));
        ranges.push((first, offsets.len()));
        sentence_chars.push((base, base + s.text.chars().count()));
        char_mentions.extend(s.mentions.iter().map(|(a, b, e)| (a + base, b + base, e.as_str())));
        text.push_str(&s.text);
    }
    let document = Document::new(doc_id, &text, &offsets, &ranges)?;

    let token_at_start = |c: usize| offsets.iter().position(|&(s, _)| s == c);
    let token_at_end = |c: usize| offsets.iter().position(|&(_, e)| e == c);
    let mut mentions = Vec::new();
    let mut members: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for (k, &(a, b, entity)) in char_mentions.iter().enumerate() {
        let (Some(s), Some(e)) = (token_at_start(a), token_at_end(b)) else {
            return Err(Error::input(format!("{doc_id}: mention at chars {a}..{b} is not token aligned")));
        };
        let id = format!("m{k}");
        let etype = if entity.starts_with('O') {
            EntityType::Outcome
        } else {
            EntityType::Intervention
        };
        mentions.push(Mention {
            mention_id: id.clone(),
            doc_id: doc_id.to_string(),
            span: Span::new(s, e + 1),
            etype,
        });
        members.entry(entity).or_default().push(id);
    }

    let mut entities = Vec::new();
    let ids: Vec<(&str, EntityType)> = arms
        .iter()
        .map(|a| (a.id.as_str(), EntityType::Intervention))
        .chain(outcomes.iter().map(|o| (o.id.as_str(), EntityType::Outcome)))
        .collect();
    for (id, etype) in ids {
        let Some(ms) = members.get(id) else { continue };
        let first = mentions.iter().find(|m| m.mention_id == ms[0]).expect("recorded");
        entities.push(Entity {
            entity_id: id.to_string(),
            doc_id: doc_id.to_string(),
            etype,
            mentions: ms.clone(),
            canonical_text: document.span_text(first.span),
        });
    }

    let relations: Vec<RelationTuple> = planned
        .iter()
        .map(|p| RelationTuple {
            doc_id: doc_id.to_string(),
            intervention: arms[p.arm].id.clone(),
            comparator: Some(arms[comparator].id.clone()),
            outcome: outcomes[p.outcome].id.clone(),
            direction: p.direction,
            evidence_sentence: p.sentence,
            confidence: 1.0,
        })
        .collect();
    let mut evidence: Vec<usize> = planned.iter().map(|p| p.sentence).collect();
    evidence.sort_unstable();
    evidence.dedup();

    let prompts = planned
        .iter()
        .map(|p| Prompt {
            doc_id: doc_id.to_string(),
            intervention: arms[p.arm].short.clone(),
            comparator: arms[comparator].short.clone(),
            outcome: outcomes[p.outcome].surface.clone(),
            label: p.direction,
            evidence: sentence_chars[p.sentence],
        })
        .collect();
    let hard_cases = hard
        .iter()
        .map(|&(sentence, o)| HardCase {
            doc_id: doc_id.to_string(),
            evidence: sentence,
            outcome: outcomes[o].id.clone(),
        })
        .collect();
    let doc = AnnotatedDocument::new(document, mentions, entities, evidence, relations)?;
    Ok((doc, prompts, hard_cases))
}

/// Generates `config.num_docs` abstracts with ids `{prefix}{index}`.
pub fn generate(config: &SynthConfig, prefix: &str) -> Result<SynthCorpus> {
    for (name, p) in [("hard_fraction", config.hard_fraction), ("three_arm_fraction", config.three_arm_fraction)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!("{name} {p} outside [0, 1]")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = SynthCorpus {
        docs: Vec::with_capacity(config.num_docs),
        prompts: Vec::new(),
        hard_cases: Vec::new(),
    };
    for i in 0..config.num_docs {
        let (doc, prompts, hard) = generate_doc(&format!("{prefix}{i:04}"), &mut rng, config)?;
        out.docs.push(doc);
        out.prompts.extend(prompts);
        out.hard_cases.extend(hard);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documents_validate_and_are_deterministic() {
        let a = generate(&SynthConfig::new(60, 5), "s").unwrap();
        let b = generate(&SynthConfig::new(60, 5), "s").unwrap();
        assert_eq!(a.docs, b.docs);
        assert_eq!(a.prompts, b.prompts);
        for d in &a.docs {
            d.validate().unwrap();
            assert!(!d.relations.is_empty());
            for r in &d.relations {
                let sentence = d.document.sentence(r.evidence_sentence).unwrap();
                let outcome_inside = d
                    .entity_spans(&r.outcome)
                    .iter()
                    .any(|s| sentence.contains(s));
                assert!(outcome_inside);
            }
        }
        assert!(!a.hard_cases.is_empty());
        assert_ne!(a.docs, generate(&SynthConfig::new(60, 6), "s").unwrap().docs);
    }

    #[test]
    fn mentions_match_surfaces() {
        let c = generate(&SynthConfig::new(20, 1), "t").unwrap();
        for d in &c.docs {
            for e in &d.entities {
                for m in &e.mentions {
                    let span = d.mention(m).unwrap().span;
                    let text = d.document.span_text(span).to_lowercase();
                    assert!(!text.is_empty());
                    assert!(!text.starts_with(' ') && !text.ends_with(' '));
                }
            }
        }
        let p = &c.prompts[0];
        let d = c.docs.iter().find(|d| d.doc_id() == p.doc_id).unwrap();
        assert!(p.evidence.1 <= d.document.num_chars());
    }

    #[test]
    fn fill_records_mentions() {
        let mut m = BTreeMap::new();
        m.insert("O", ("pain scores".to_string(), "O1".to_string()));
        let s = fill("{O} fell.", &m, &BTreeMap::new()).unwrap();
        assert_eq!(s.text, "Pain scores fell.");
        assert_eq!(s.mentions, vec![(0, 11, "O1".to_string())]);
        assert!(fill("{X}", &m, &BTreeMap::new()).is_err());
    }
}
