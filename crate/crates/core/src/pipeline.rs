//! End-to-end extraction: mentions, entity grouping, evidence sentences,
//! linking and direction inference, with gold-input switches for
//! ablations.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::checkpoint::{Checkpoint, ModelKind};
use crate::config::Config;
use crate::corpus::{AnnotatedDocument, Document, Entity, Mention, RelationTuple};
use crate::encoder::{build_encoder, EncoderBackend};
use crate::error::{Error, Result};
use crate::extraction::{predict_mentions, EvidenceClassifier, TaggerModel};
use crate::inference::{predict_direction_words, InferenceModel};
use crate::linking::{link_evidence, Link, LinkerModel};
use crate::config::CheckpointPaths;
use crate::encoder::fnv1a;
use crate::extraction::{train_evidence_classifier, train_tagger, SentenceSample};
use crate::inference::{train_inference, InferSample};
use crate::linking::{train_linker, LinkSample};
use crate::supervision::distant::{build_training_corpus, representative_span, DistantCorpus, Prompt, Sample};
use crate::supervision::group_mentions;

/// Which stages read gold annotations instead of model output.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    /// Gold mentions and their gold grouping into entities.
    pub gold_mentions: bool,
    pub gold_evidence: bool,
    /// Gold (intervention, comparator, outcome, evidence) assignments; only
    /// the direction is predicted. Implies the other two switches.
    pub gold_links: bool,
}

impl Ablation {
    pub fn any(&self) -> bool {
        self.gold_mentions || self.gold_evidence || self.gold_links
    }
}

/// Trained models plus the settings needed to run them.
pub struct Pipeline {
    pub backend: Arc<dyn EncoderBackend>,
    pub tagger: TaggerModel,
    pub evidence: EvidenceClassifier,
    pub linker: LinkerModel,
    pub inference: InferenceModel,
    pub similarity_threshold: f64,
    pub evidence_threshold: f64,
    pub binary: bool,
}

fn load<M: Serialize + serde::de::DeserializeOwned>(
    path: &Option<std::path::PathBuf>,
    kind: ModelKind,
    config: &Config,
) -> Result<M> {
    let path = path
        .as_ref()
        .ok_or_else(|| Error::Config(format!("checkpoints.{} is not set", format!("{kind:?}").to_lowercase())))?;
    if !path.exists() {
        return Err(Error::Config(format!("checkpoint {} does not exist", path.display())));
    }
    let ckpt: Checkpoint<M> = Checkpoint::load(path, kind)?;
    if ckpt.encoder.dim != config.encoder.dim || ckpt.encoder.name != config.encoder.name {
        return Err(Error::Config(format!(
            "{} was trained with a {}-{} encoder but the config uses {}-{}",
            path.display(),
            ckpt.encoder.name,
            ckpt.encoder.dim,
            config.encoder.name,
            config.encoder.dim
        )));
    }
    Ok(ckpt.model)
}

impl Pipeline {
    /// Builds the encoder and loads every checkpoint named in the config.
    pub fn load(config: &Config) -> Result<Pipeline> {
        config.validate()?;
        let backend = build_encoder(&config.encoder)?;
        let mut evidence: EvidenceClassifier = load(&config.checkpoints.evidence, ModelKind::Evidence, config)?;
        evidence.threshold = config.evidence.threshold;
        Ok(Pipeline {
            tagger: load(&config.checkpoints.tagger, ModelKind::Tagger, config)?,
            evidence,
            linker: load(&config.checkpoints.linker, ModelKind::Linker, config)?,
            inference: load(&config.checkpoints.inference, ModelKind::Inference, config)?,
            similarity_threshold: config.grouping.similarity_threshold,
            evidence_threshold: config.evidence.threshold,
            binary: config.pipeline.binary,
            backend,
        })
    }
}

/// Two or more tuples for one triplet disagreed on the direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conflict {
    pub doc_id: String,
    pub intervention: String,
    pub comparator: Option<String>,
    pub outcome: String,
    pub kept: crate::corpus::Direction,
    pub evidence: Vec<usize>,
}

/// Collapses tuples sharing (intervention, comparator, outcome) to the most
/// confident one (earliest evidence sentence, then earliest position, on
/// ties). Output keeps input order of the survivors.
pub fn dedupe_relations(tuples: &[RelationTuple]) -> (Vec<RelationTuple>, Vec<Conflict>) {
    type Key<'a> = (&'a str, &'a str, Option<&'a str>, &'a str);
    let mut groups: BTreeMap<Key, Vec<usize>> = BTreeMap::new();
    for (k, r) in tuples.iter().enumerate() {
        groups
            .entry((r.doc_id.as_str(), r.intervention.as_str(), r.comparator.as_deref(), r.outcome.as_str()))
            .or_default()
            .push(k);
    }
    let mut keep = Vec::new();
    let mut conflicts = Vec::new();
    for members in groups.values() {
        let best = *members
            .iter()
            .min_by(|&&a, &&b| {
                tuples[b]
                    .confidence
                    .total_cmp(&tuples[a].confidence)
                    .then(tuples[a].evidence_sentence.cmp(&tuples[b].evidence_sentence))
                    .then(a.cmp(&b))
            })
            .expect("groups are non-empty");
        keep.push(best);
        let r = &tuples[best];
        if members.iter().any(|&m| tuples[m].direction != r.direction) {
            let mut evidence: Vec<usize> = members.iter().map(|&m| tuples[m].evidence_sentence).collect();
            evidence.sort_unstable();
            evidence.dedup();
            conflicts.push(Conflict {
                doc_id: r.doc_id.clone(),
                intervention: r.intervention.clone(),
                comparator: r.comparator.clone(),
                outcome: r.outcome.clone(),
                kept: r.direction,
                evidence,
            });
        }
    }
    keep.sort_unstable();
    (keep.into_iter().map(|k| tuples[k].clone()).collect(), conflicts)
}

/// Output for one document.
#[derive(Debug, Clone, PartialEq)]
pub struct DocPrediction {
    pub doc: AnnotatedDocument,
    pub links: Vec<Link>,
    pub conflicts: Vec<Conflict>,
    pub skipped_no_interventions: usize,
}

/// Links for one document, as stored in `links.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocLinks {
    pub doc_id: String,
    pub links: Vec<Link>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunReport {
    pub documents: usize,
    pub relations: usize,
    pub failures: Vec<(String, String)>,
    pub conflicts: Vec<Conflict>,
    pub evidence_skipped_no_interventions: usize,
    pub ablation: Ablation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    /// One entry per input document, in input order. A document whose
    /// processing failed appears without annotations.
    pub docs: Vec<AnnotatedDocument>,
    pub links: Vec<Vec<Link>>,
    pub report: RunReport,
}

impl RunOutput {
    pub fn doc_links(&self) -> Vec<DocLinks> {
        self.docs
            .iter()
            .zip(&self.links)
            .map(|(d, l)| DocLinks {
                doc_id: d.doc_id().to_string(),
                links: l.clone(),
            })
            .collect()
    }

    pub fn relations(&self) -> Vec<RelationTuple> {
        self.docs.iter().flat_map(|d| d.relations.iter().cloned()).collect()
    }
}

fn words_of(doc: &Document, mentions: &[Mention], entity: &Entity, sentence: usize) -> Result<Vec<String>> {
    let span = representative_span(doc, mentions, entity, sentence)
        .ok_or_else(|| Error::input(format!("entity {} has no resolvable mention", entity.entity_id)))?;
    Ok(doc.token_texts(span).into_iter().map(String::from).collect())
}

impl Pipeline {
    /// Runs every stage on one document. `doc` may carry gold annotations;
    /// they are read only where `ablation` asks for them.
    pub fn run_document(&self, doc: &AnnotatedDocument, ablation: Ablation) -> Result<DocPrediction> {
        let d = &doc.document;
        let backend = self.backend.as_ref();
        let gold_mentions = ablation.gold_mentions || ablation.gold_links;
        let gold_evidence = ablation.gold_evidence || ablation.gold_links;

        let (mentions, entities) = if gold_mentions {
            (doc.mentions.clone(), doc.entities.clone())
        } else {
            let mentions = predict_mentions(&self.tagger, backend, d)?;
            let entities = group_mentions(backend, d, &mentions, self.similarity_threshold)?;
            (mentions, entities)
        };

        let evidence: Vec<(usize, f64)> = if gold_evidence {
            let mut ev: Vec<usize> = doc.evidence_sentences.clone();
            ev.sort_unstable();
            ev.dedup();
            ev.into_iter().map(|i| (i, 1.0)).collect()
        } else {
            let mut clf = self.evidence.clone();
            clf.threshold = self.evidence_threshold;
            crate::extraction::classify_sentences(&clf, backend, d)?
                .into_iter()
                .map(|e| (e.sentence_index, e.score))
                .collect()
        };
        let evidence_score: BTreeMap<usize, f64> = evidence.iter().copied().collect();

        let (links, skipped) = if ablation.gold_links {
            let mut links: Vec<Link> = Vec::new();
            for r in &doc.relations {
                let existing = links.iter_mut().find(|l| {
                    l.evidence == r.evidence_sentence && l.intervention == r.intervention && l.comparator == r.comparator
                });
                match existing {
                    Some(l) => {
                        if !l.outcomes.contains(&r.outcome) {
                            l.outcomes.push(r.outcome.clone());
                        }
                    }
                    None => links.push(Link {
                        evidence: r.evidence_sentence,
                        intervention: r.intervention.clone(),
                        comparator: r.comparator.clone(),
                        outcomes: vec![r.outcome.clone()],
                        primary_prob: 1.0,
                        comparator_prob: r.comparator.as_ref().map(|_| 1.0),
                    }),
                }
            }
            (links, 0)
        } else {
            let indices: Vec<usize> = evidence.iter().map(|(i, _)| *i).collect();
            let out = link_evidence(&self.linker, backend, d, &indices, &mentions, &entities)?;
            (out.links, out.skipped_no_interventions)
        };

        let entity = |id: &str| {
            entities
                .iter()
                .find(|e| e.entity_id == id)
                .ok_or_else(|| Error::input(format!("link references unknown entity {id}")))
        };
        let mut raw = Vec::new();
        for link in &links {
            let ie = entity(&link.intervention)?;
            let iw = words_of(d, &mentions, ie, link.evidence)?;
            let sentence = d
                .sentence(link.evidence)
                .ok_or_else(|| Error::input(format!("evidence sentence {} out of range", link.evidence)))?;
            let sw = d.token_texts(sentence);
            for o in &link.outcomes {
                let ow = words_of(d, &mentions, entity(o)?, link.evidence)?;
                let (direction, p) = predict_direction_words(
                    &self.inference,
                    backend,
                    &iw.iter().map(String::as_str).collect::<Vec<_>>(),
                    &ow.iter().map(String::as_str).collect::<Vec<_>>(),
                    &sw,
                )?;
                let ev = evidence_score.get(&link.evidence).copied().unwrap_or(1.0);
                raw.push(RelationTuple {
                    doc_id: d.doc_id().to_string(),
                    intervention: link.intervention.clone(),
                    comparator: if self.binary { None } else { link.comparator.clone() },
                    outcome: o.clone(),
                    direction,
                    evidence_sentence: link.evidence,
                    confidence: (ev * link.primary_prob * p).clamp(0.0, 1.0),
                });
            }
        }
        let (relations, conflicts) = dedupe_relations(&raw);
        let evidence_sentences = evidence.iter().map(|(i, _)| *i).collect();
        let doc = AnnotatedDocument::new(d.clone(), mentions, entities, evidence_sentences, relations)?;
        Ok(DocPrediction {
            doc,
            links,
            conflicts,
            skipped_no_interventions: skipped,
        })
    }

    /// Processes documents independently. A failing document is reported
    /// and emitted without annotations.
    pub fn run_end_to_end(&self, docs: &[AnnotatedDocument], ablation: Ablation) -> RunOutput {
        let mut out = RunOutput {
            docs: Vec::with_capacity(docs.len()),
            links: Vec::with_capacity(docs.len()),
            report: RunReport {
                documents: docs.len(),
                ablation,
                ..RunReport::default()
            },
        };
        for doc in docs {
            match self.run_document(doc, ablation) {
                Ok(p) => {
                    out.report.relations += p.doc.relations.len();
                    out.report.conflicts.extend(p.conflicts);
                    out.report.evidence_skipped_no_interventions += p.skipped_no_interventions;
                    out.docs.push(p.doc);
                    out.links.push(p.links);
                }
                Err(e) => {
                    log::warn!("{}: {e}", doc.doc_id());
                    out.report.failures.push((doc.doc_id().to_string(), e.to_string()));
                    out.docs.push(AnnotatedDocument::unannotated(doc.document.clone()));
                    out.links.push(Vec::new());
                }
            }
        }
        out
    }
}

/// Training samples split by task.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TaskSamples {
    pub evidence: Vec<SentenceSample>,
    pub link: Vec<LinkSample>,
    pub infer: Vec<InferSample>,
}

impl TaskSamples {
    pub fn from_samples<'a>(samples: impl IntoIterator<Item = &'a Sample>) -> TaskSamples {
        let mut out = TaskSamples::default();
        for s in samples {
            match s {
                Sample::Evidence { words, label, .. } => out.evidence.push(SentenceSample {
                    words: words.clone(),
                    label: *label,
                }),
                Sample::Link { sample, .. } => out.link.push(sample.clone()),
                Sample::Infer { sample, .. } => out.infer.push(sample.clone()),
            }
        }
        out
    }
}

fn sample_doc_id(s: &Sample) -> &str {
    match s {
        Sample::Evidence { doc_id, .. } | Sample::Link { doc_id, .. } | Sample::Infer { doc_id, .. } => doc_id,
    }
}

/// Deterministic dev membership: roughly one document in `1 / fraction`,
/// chosen by a hash of the doc id.
pub fn is_dev(seed: u64, doc_id: &str, fraction: f64) -> bool {
    let h = fnv1a(seed ^ 0x9e37_79b9_7f4a_7c15, doc_id.as_bytes());
    ((h % 10_000) as f64) < fraction * 10_000.0
}

/// Splits samples into train and dev by document.
pub fn split_samples(samples: &[Sample], seed: u64, dev_fraction: f64) -> (TaskSamples, TaskSamples) {
    let (dev, train): (Vec<&Sample>, Vec<&Sample>) =
        samples.iter().partition(|s| is_dev(seed, sample_doc_id(s), dev_fraction));
    (TaskSamples::from_samples(train), TaskSamples::from_samples(dev))
}

pub fn split_docs(docs: &[AnnotatedDocument], seed: u64, dev_fraction: f64) -> (Vec<AnnotatedDocument>, Vec<AnnotatedDocument>) {
    let (dev, train): (Vec<AnnotatedDocument>, Vec<AnnotatedDocument>) =
        docs.iter().cloned().partition(|d| is_dev(seed, d.doc_id(), dev_fraction));
    (train, dev)
}

/// Fraction of documents held out for early stopping.
pub const DEV_FRACTION: f64 = 0.1;

impl Pipeline {
    /// Trains every stage. The tagger learns from `annotated` (gold mention
    /// spans); the other stages learn from distantly supervised corpus
    /// built over the same documents and `prompts`.
    pub fn train(config: &Config, annotated: &[AnnotatedDocument], prompts: &[Prompt]) -> Result<(Pipeline, DistantCorpus)> {
        config.validate()?;
        let backend = build_encoder(&config.encoder)?;
        let (train_docs, dev_docs) = split_docs(annotated, config.seed, DEV_FRACTION);
        let tagger = train_tagger(backend.as_ref(), &train_docs, &dev_docs, &config.tagger)?;
        let raw: Vec<Document> = annotated.iter().map(|d| d.document.clone()).collect();
        let distant = build_training_corpus(&raw, prompts, &tagger, backend.as_ref(), &config.distant())?;
        let pipeline = Pipeline::train_downstream(config, backend, tagger, &distant.samples)?;
        Ok((pipeline, distant))
    }

    /// Trains the evidence, linking and inference stages from samples.
    pub fn train_downstream(
        config: &Config,
        backend: Arc<dyn EncoderBackend>,
        tagger: TaggerModel,
        samples: &[Sample],
    ) -> Result<Pipeline> {
        let (train, dev) = split_samples(samples, config.seed, DEV_FRACTION);
        let b = backend.as_ref();
        let evidence = train_evidence_classifier(b, &train.evidence, &dev.evidence, &config.evidence)?;
        let linker = train_linker(b, &train.link, &dev.link, &config.linker.train)?;
        let inference = train_inference(b, &train.infer, &dev.infer, &config.inference.train)?;
        Ok(Pipeline {
            tagger,
            evidence,
            linker,
            inference,
            similarity_threshold: config.grouping.similarity_threshold,
            evidence_threshold: config.evidence.threshold,
            binary: config.pipeline.binary,
            backend,
        })
    }

    /// Writes the four checkpoints into `dir` and returns their paths.
    pub fn save(&self, config: &Config, dir: &Path) -> Result<CheckpointPaths> {
        std::fs::create_dir_all(dir)?;
        let paths = CheckpointPaths {
            tagger: Some(dir.join("tagger.json")),
            evidence: Some(dir.join("evidence.json")),
            linker: Some(dir.join("linker.json")),
            inference: Some(dir.join("inference.json")),
        };
        let mut tagger = Checkpoint::new(ModelKind::Tagger, &config.encoder, &config.tagger, &self.tagger)?;
        tagger.tag_set = Some(self.tagger.tagset.labels.clone());
        tagger.save(paths.tagger.as_deref().expect("set"))?;
        Checkpoint::new(ModelKind::Evidence, &config.encoder, &config.evidence, &self.evidence)?
            .save(paths.evidence.as_deref().expect("set"))?;
        Checkpoint::new(ModelKind::Linker, &config.encoder, &config.linker, &self.linker)?
            .save(paths.linker.as_deref().expect("set"))?;
        Checkpoint::new(ModelKind::Inference, &config.encoder, &config.inference, &self.inference)?
            .save(paths.inference.as_deref().expect("set"))?;
        Ok(paths)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Direction;

    fn t(i: &str, c: Option<&str>, o: &str, d: Direction, ev: usize, conf: f64) -> RelationTuple {
        RelationTuple {
            doc_id: "d".into(),
            intervention: i.into(),
            comparator: c.map(Into::into),
            outcome: o.into(),
            direction: d,
            evidence_sentence: ev,
            confidence: conf,
        }
    }

    #[test]
    fn dedupe_cases() {
        let a = t("i", Some("c"), "o", Direction::Increased, 1, 0.5);
        let b = t("i", Some("c"), "o2", Direction::Increased, 2, 0.5);
        assert_eq!(dedupe_relations(&[a.clone(), b.clone()]).0, vec![a.clone(), b.clone()]);
        let (kept, conflicts) = dedupe_relations(&[a.clone(), a.clone()]);
        assert_eq!((kept.len(), conflicts.len()), (1, 0));

        let stronger = t("i", Some("c"), "o", Direction::Decreased, 3, 0.9);
        let (kept, conflicts) = dedupe_relations(&[a.clone(), b.clone(), stronger.clone()]);
        assert_eq!(kept, vec![b, stronger]);
        assert_eq!(conflicts.len(), 1);
        assert_eq!(conflicts[0].kept, Direction::Decreased);
        assert_eq!(conflicts[0].evidence, vec![1, 3]);
    }

    #[test]
    fn dedupe_tie_prefers_earliest_evidence() {
        let late = t("i", None, "o", Direction::Increased, 5, 0.5);
        let early = t("i", None, "o", Direction::NoDifference, 2, 0.5);
        let (kept, _) = dedupe_relations(&[late, early.clone()]);
        assert_eq!(kept, vec![early]);
    }
}
