//! Builds a distantly supervised corpus from raw abstracts and prompt
//! annotations, plus the sample sidecar used to train the later stages.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sampling::{paired_negatives, sample_evidence_training, synthesize_linker_negatives};
use super::{assign_mentions_to_entities, Assignment, GroupingConfig};
use crate::corpus::{read_jsonl, AnnotatedDocument, Direction, Document, Entity, EntityType, Mention, RelationTuple, Span};
use crate::encoder::{encode_span, encode_text, fnv1a, EncoderBackend};
use crate::error::{Error, Result};

/// Seed slot the entity came from, if any, and its mentions.
type Group<'a> = (Option<(usize, usize)>, Vec<&'a Mention>);
use crate::extraction::{predict_mentions, TaggerModel};
use crate::inference::InferSample;
use crate::linking::{LinkLabel, LinkSample};

/// One prompt: an (intervention, comparator, outcome) triplet with its
/// reported direction and a character span of supporting text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prompt {
    pub doc_id: String,
    #[serde(rename = "i")]
    pub intervention: String,
    #[serde(rename = "c", default)]
    pub comparator: String,
    #[serde(rename = "o")]
    pub outcome: String,
    pub label: Direction,
    pub evidence: (usize, usize),
}

pub fn load_prompts(path: &Path) -> Result<Vec<Prompt>> {
    read_jsonl(path)
}

/// A training pair for one of the downstream models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "lowercase")]
pub enum Sample {
    Evidence {
        doc_id: String,
        sentence: usize,
        words: Vec<String>,
        label: bool,
    },
    Link {
        doc_id: String,
        evidence: usize,
        #[serde(flatten)]
        sample: LinkSample,
    },
    Infer {
        doc_id: String,
        evidence: usize,
        #[serde(flatten)]
        sample: InferSample,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistantConfig {
    #[serde(default)]
    pub grouping: GroupingConfig,
    /// UNRELATED samples per gold (intervention, comparator) pair.
    #[serde(default = "default_negatives")]
    pub linker_negatives: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_negatives() -> usize {
    3
}

impl Default for DistantConfig {
    fn default() -> Self {
        DistantConfig {
            grouping: GroupingConfig::default(),
            linker_negatives: default_negatives(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DistantReport {
    pub documents: usize,
    pub prompts: usize,
    pub prompts_missing_doc: usize,
    pub prompts_invalid: usize,
    pub prompts_ungrounded: usize,
    pub relations: usize,
    pub entities: usize,
    pub mentions: usize,
    pub samples: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistantCorpus {
    pub docs: Vec<AnnotatedDocument>,
    pub samples: Vec<Sample>,
    pub report: DistantReport,
}

fn to_words(words: &[&str]) -> Vec<String> {
    words.iter().map(|w| w.to_string()).collect()
}

/// Per-document random stream derived from the run seed and the doc id.
pub fn doc_rng(seed: u64, doc_id: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(fnv1a(seed, doc_id.as_bytes()))
}

/// The mention standing for `entity` in sentence `sentence`: its first
/// mention inside that sentence, else its first mention overall.
pub fn representative_span(doc: &Document, mentions: &[Mention], entity: &Entity, sentence: usize) -> Option<Span> {
    let bounds = doc.sentence(sentence)?;
    let spans: Vec<Span> = entity
        .mentions
        .iter()
        .filter_map(|id| mentions.iter().find(|m| &m.mention_id == id))
        .map(|m| m.span)
        .collect();
    spans
        .iter()
        .filter(|s| bounds.contains(s))
        .min()
        .or_else(|| spans.iter().min())
        .copied()
}

/// Link and inference samples for the relations of an annotated document.
pub fn relation_samples(doc: &AnnotatedDocument, negatives: usize, rng: &mut ChaCha8Rng) -> Vec<Sample> {
    let d = &doc.document;
    let spans_of = |id: &str| doc.entity(id).map(|_| doc.entity_spans(id)).unwrap_or_default();
    let tagged: Vec<Span> = doc
        .mentions
        .iter()
        .filter(|m| m.etype == EntityType::Intervention)
        .map(|m| m.span)
        .collect();
    let mut out = Vec::new();
    let mut linked: HashSet<(usize, &str, Option<&str>)> = HashSet::new();
    for r in &doc.relations {
        let Some(sentence) = d.sentence(r.evidence_sentence) else { continue };
        let sentence_words = to_words(&d.token_texts(sentence));
        let (Some(ie), Some(oe)) = (doc.entity(&r.intervention), doc.entity(&r.outcome)) else {
            continue;
        };
        let ce = r.comparator.as_deref().and_then(|c| doc.entity(c));
        let rep = |e: &Entity| representative_span(d, &doc.mentions, e, r.evidence_sentence).expect("entities are non-empty");

        if linked.insert((r.evidence_sentence, r.intervention.as_str(), r.comparator.as_deref())) {
            let mut exclude = spans_of(&r.intervention);
            let mut push = |span: Span, label: LinkLabel| {
                out.push(Sample::Link {
                    doc_id: doc.doc_id().to_string(),
                    evidence: r.evidence_sentence,
                    sample: LinkSample {
                        candidate: to_words(&d.token_texts(span)),
                        sentence: sentence_words.clone(),
                        label,
                    },
                });
            };
            for s in spans_of(&r.intervention) {
                push(s, LinkLabel::Primary);
            }
            if let Some(c) = ce {
                for s in spans_of(&c.entity_id) {
                    push(s, LinkLabel::Comparator);
                }
                exclude.extend(spans_of(&c.entity_id));
            }
            let gold_c = ce.map(rep);
            for s in synthesize_linker_negatives(d, &tagged, &exclude, rep(ie), gold_c, negatives, rng) {
                push(s, LinkLabel::Unrelated);
            }
        }

        out.push(Sample::Infer {
            doc_id: doc.doc_id().to_string(),
            evidence: r.evidence_sentence,
            sample: InferSample {
                intervention: to_words(&d.token_texts(rep(ie))),
                outcome: to_words(&d.token_texts(rep(oe))),
                sentence: sentence_words,
                label: r.direction,
            },
        });
    }
    out
}

fn evidence_samples(doc: &Document, pairs: &[(usize, bool)]) -> Vec<Sample> {
    pairs
        .iter()
        .map(|&(i, label)| Sample::Evidence {
            doc_id: doc.doc_id().to_string(),
            sentence: i,
            words: to_words(&doc.token_texts(doc.sentence(i).expect("valid index"))),
            label,
        })
        .collect()
}

/// All training samples implied by a fully annotated document.
pub fn training_samples(doc: &AnnotatedDocument, config: &DistantConfig) -> Vec<Sample> {
    let mut rng = doc_rng(config.seed, doc.doc_id());
    let mut positives = doc.evidence_sentences.clone();
    positives.sort_unstable();
    positives.dedup();
    let mut out = evidence_samples(&doc.document, &paired_negatives(&doc.document, &positives));
    out.extend(relation_samples(doc, config.linker_negatives, &mut rng));
    out
}

struct Seeds {
    texts: Vec<String>,
}

impl Seeds {
    fn new() -> Seeds {
        Seeds { texts: Vec::new() }
    }

    fn add(&mut self, text: &str) -> Option<usize> {
        let t = text.trim();
        if t.is_empty() {
            return None;
        }
        if let Some(k) = self.texts.iter().position(|s| s.eq_ignore_ascii_case(t)) {
            return Some(k);
        }
        self.texts.push(t.to_string());
        Some(self.texts.len() - 1)
    }
}

fn project_document(
    doc: &Document,
    prompts: &[&Prompt],
    tagger: &TaggerModel,
    backend: &dyn EncoderBackend,
    config: &DistantConfig,
    report: &mut DistantReport,
) -> Result<(AnnotatedDocument, Vec<Sample>)> {
    let mentions = predict_mentions(tagger, backend, doc)?;

    let mut seeds = [Seeds::new(), Seeds::new()];
    let mut parsed = Vec::new();
    let mut evidence_chars = Vec::new();
    for p in prompts {
        let (s, e) = p.evidence;
        if s >= e || e > doc.num_chars() {
            log::warn!("{}: prompt evidence span {s}..{e} outside the text", doc.doc_id());
            report.prompts_invalid += 1;
            continue;
        }
        let Some(i) = seeds[0].add(&p.intervention) else {
            report.prompts_invalid += 1;
            continue;
        };
        let Some(o) = seeds[1].add(&p.outcome) else {
            report.prompts_invalid += 1;
            continue;
        };
        let c = seeds[0].add(&p.comparator);
        evidence_chars.push((s, e));
        parsed.push((i, c, o, p.label, doc.sentences_overlapping_chars(s, e)));
    }

    // seed index -> member mentions; unassigned mentions become singletons
    let mut members: [Vec<Vec<&Mention>>; 2] = [vec![Vec::new(); seeds[0].texts.len()], vec![Vec::new(); seeds[1].texts.len()]];
    let mut singletons: Vec<&Mention> = Vec::new();
    for (slot, etype) in EntityType::ALL.into_iter().enumerate() {
        let typed: Vec<&Mention> = mentions.iter().filter(|m| m.etype == etype).collect();
        let seed_vecs = seeds[slot]
            .texts
            .iter()
            .map(|t| encode_text(backend, t))
            .collect::<Result<Vec<_>>>()?;
        let vecs = typed
            .iter()
            .map(|m| encode_span(backend, doc, m.span))
            .collect::<Result<Vec<_>>>()?;
        let assignment = assign_mentions_to_entities(&vecs, &seed_vecs, config.grouping.similarity_threshold)?;
        for (m, a) in typed.into_iter().zip(assignment) {
            match a {
                Assignment::Existing(k) => members[slot][k].push(m),
                Assignment::New => singletons.push(m),
            }
        }
    }

    // entities ordered by first mention; remember which seed each came from
    let mut groups: Vec<Group> = Vec::new();
    for (slot, per_seed) in members.iter().enumerate() {
        for (k, ms) in per_seed.iter().enumerate() {
            if !ms.is_empty() {
                groups.push((Some((slot, k)), ms.clone()));
            }
        }
    }
    groups.extend(singletons.into_iter().map(|m| (None, vec![m])));
    groups.sort_by_key(|(_, ms)| ms.iter().map(|m| (m.span.start, m.span.end)).min());
    let mut entities = Vec::new();
    let mut seed_entity: BTreeMap<(usize, usize), String> = BTreeMap::new();
    for (n, (seed, ms)) in groups.iter().enumerate() {
        let id = format!("e{n}");
        if let Some(key) = seed {
            seed_entity.insert(*key, id.clone());
        }
        let mut ms = ms.clone();
        ms.sort_by_key(|m| (m.span.start, m.span.end));
        entities.push(Entity {
            entity_id: id,
            doc_id: doc.doc_id().to_string(),
            etype: ms[0].etype,
            mentions: ms.iter().map(|m| m.mention_id.clone()).collect(),
            canonical_text: doc.span_text(ms[0].span),
        });
    }

    let mut relations: Vec<RelationTuple> = Vec::new();
    for (i, c, o, label, sentences) in parsed {
        let (Some(ie), Some(oe)) = (seed_entity.get(&(0, i)), seed_entity.get(&(1, o))) else {
            report.prompts_ungrounded += 1;
            continue;
        };
        let ce = c.and_then(|c| seed_entity.get(&(0, c))).filter(|c| *c != ie);
        // prefer the overlapping sentence that mentions the outcome
        let outcome = entities.iter().find(|e| &e.entity_id == oe).expect("grounded");
        let inside = |s: usize| {
            let b = doc.sentence(s).expect("valid");
            mentions
                .iter()
                .any(|m| outcome.mentions.contains(&m.mention_id) && b.contains(&m.span))
        };
        let evidence = sentences.iter().copied().find(|&s| inside(s)).unwrap_or(sentences[0]);
        let r = RelationTuple {
            doc_id: doc.doc_id().to_string(),
            intervention: ie.clone(),
            comparator: ce.cloned(),
            outcome: oe.clone(),
            direction: label,
            evidence_sentence: evidence,
            confidence: 1.0,
        };
        if !relations.contains(&r) {
            relations.push(r);
        }
    }

    let mut evidence_sentences: Vec<usize> = evidence_chars
        .iter()
        .flat_map(|&(s, e)| doc.sentences_overlapping_chars(s, e))
        .collect();
    evidence_sentences.sort_unstable();
    evidence_sentences.dedup();

    let annotated = AnnotatedDocument::new(doc.clone(), mentions, entities, evidence_sentences, relations)?;
    let mut samples = evidence_samples(doc, &sample_evidence_training(doc, &evidence_chars));
    let mut rng = doc_rng(config.seed, doc.doc_id());
    samples.extend(relation_samples(&annotated, config.linker_negatives, &mut rng));
    Ok((annotated, samples))
}

/// Tags every raw document, grounds its prompts to entities and derives
/// training samples. Prompts for unknown documents are skipped and counted.
pub fn build_training_corpus(
    raw: &[Document],
    prompts: &[Prompt],
    tagger: &TaggerModel,
    backend: &dyn EncoderBackend,
    config: &DistantConfig,
) -> Result<DistantCorpus> {
    config.grouping.validate()?;
    let mut report = DistantReport {
        prompts: prompts.len(),
        ..DistantReport::default()
    };
    let known: HashSet<&str> = raw.iter().map(Document::doc_id).collect();
    if known.len() != raw.len() {
        return Err(Error::input("duplicate doc_id in raw documents"));
    }
    let mut by_doc: BTreeMap<&str, Vec<&Prompt>> = BTreeMap::new();
    for p in prompts {
        if known.contains(p.doc_id.as_str()) {
            by_doc.entry(p.doc_id.as_str()).or_default().push(p);
        } else {
            report.prompts_missing_doc += 1;
        }
    }
    if report.prompts_missing_doc > 0 {
        log::warn!("{} prompts reference unknown documents", report.prompts_missing_doc);
    }

    let mut docs = Vec::with_capacity(raw.len());
    let mut samples = Vec::new();
    for doc in raw {
        let ps = by_doc.get(doc.doc_id()).cloned().unwrap_or_default();
        let (annotated, s) = project_document(doc, &ps, tagger, backend, config, &mut report)?;
        report.relations += annotated.relations.len();
        report.entities += annotated.entities.len();
        report.mentions += annotated.mentions.len();
        docs.push(annotated);
        samples.extend(s);
    }
    report.documents = docs.len();
    for s in &samples {
        let task = match s {
            Sample::Evidence { .. } => "evidence",
            Sample::Link { .. } => "link",
            Sample::Infer { .. } => "infer",
        };
        *report.samples.entry(task.to_string()).or_default() += 1;
    }
    log::info!(
        "distant supervision: {} documents, {} relations, {} entities, {} mentions, {} prompts skipped",
        report.documents,
        report.relations,
        report.entities,
        report.mentions,
        report.prompts_missing_doc + report.prompts_invalid + report.prompts_ungrounded
    );
    Ok(DistantCorpus { docs, samples, report })
}
