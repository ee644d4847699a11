//! Corpus store. Each corpus lives in memory as an immutable corpus plus an
//! append-only run list and an atomically swapped atlas snapshot, and on
//! disk as one bundle document under `<data dir>/corpora/`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use evatlas_core::corpus::FeatureDef;
use evatlas_core::digest::ContentDigest;
use evatlas_core::stability::{stability_report, RunRef};
use evatlas_core::topic::TopicRun;
use evatlas_core::{
    compute_layout, parse_corpus, AssignmentTable, Corpus, EvidenceAtlas, IngestConfig, LayoutConfig,
    MapLayout, RunConfig, StabilityReport, TopicModel, ValidationReport,
};
use serde::{Deserialize, Serialize};

use crate::bundle::{Bundle, RunError, RunRecord, RunStatus, FORMAT_VERSION};
use crate::llm::RunOutcome;
use crate::{now_rfc3339, StoreError};

pub const DATA_DIR_VAR: &str = "EVATLAS_DATA_DIR";

#[derive(Debug, Default, Clone)]
struct SlotState {
    runs: Vec<RunRecord>,
    active_run: Option<String>,
    atlas: Option<Arc<EvidenceAtlas>>,
    layout: Option<MapLayout>,
    stability: Option<StabilityReport>,
}

#[derive(Debug)]
struct CorpusSlot {
    corpus: Arc<Corpus>,
    state: RwLock<SlotState>,
    /// Serializes bundle writes for this corpus.
    persist: Mutex<()>,
    /// Held for the duration of an LLM run.
    llm_lock: Arc<tokio::sync::Mutex<()>>,
}

impl CorpusSlot {
    fn new(corpus: Corpus, state: SlotState) -> Self {
        Self {
            corpus: Arc::new(corpus),
            state: RwLock::new(state),
            persist: Mutex::new(()),
            llm_lock: Arc::new(tokio::sync::Mutex::new(())),
        }
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, SlotState> {
        self.state.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write(&self) -> std::sync::RwLockWriteGuard<'_, SlotState> {
        self.state.write().unwrap_or_else(|e| e.into_inner())
    }

    fn bundle(&self) -> Bundle {
        let state = self.read();
        Bundle {
            format_version: FORMAT_VERSION,
            corpus: (*self.corpus).clone(),
            runs: state.runs.clone(),
            active_run: state.active_run.clone(),
            atlas_version: state.atlas.as_ref().map(|a| a.version().to_owned()),
            layout: state.layout.clone(),
            stability: state.stability.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestOutcome {
    pub corpus_id: String,
    pub studies: usize,
    /// False when an identical corpus was already stored.
    pub created: bool,
    pub report: ValidationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSubtopic {
    pub subtopic_id: String,
    pub label: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapTopic {
    pub topic_id: String,
    pub label: String,
    pub description: String,
    /// `None` for the unclassified topic.
    pub palette_index: Option<u32>,
    pub count: usize,
    pub subtopics: Vec<MapSubtopic>,
}

/// Everything the map view needs in one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapPayload {
    pub corpus_id: String,
    pub atlas_version: String,
    pub total: usize,
    pub layout: MapLayout,
    pub topics: Vec<MapTopic>,
    pub facets: Vec<FeatureDef>,
}

#[derive(Debug, Default)]
pub struct Store {
    dir: Option<PathBuf>,
    corpora: RwLock<BTreeMap<String, Arc<CorpusSlot>>>,
    /// run id -> corpus id
    run_index: RwLock<BTreeMap<String, String>>,
    latest: RwLock<Option<String>>,
}

/// Run ids are derived from the corpus id and the run's position, so they
/// are stable across processes sharing a data directory.
pub fn run_id_for(corpus_id: &str, seq: usize) -> String {
    let mut d = ContentDigest::new();
    d.field(corpus_id).field(&seq.to_string());
    d.finish("r-")
}

/// Digest of a run's output, ignoring its timestamp.
pub fn run_digest(model: &TopicModel, assignments: &AssignmentTable) -> String {
    let mut model = model.clone();
    model.run_meta.timestamp = None;
    let mut d = ContentDigest::new();
    d.bytes(&serde_json::to_vec(&model).expect("model serializes"))
        .bytes(&serde_json::to_vec(assignments).expect("assignments serialize"));
    d.finish("d-")
}

fn lock<'a, T>(l: &'a RwLock<T>) -> std::sync::RwLockReadGuard<'a, T> {
    l.read().unwrap_or_else(|e| e.into_inner())
}

fn lock_mut<'a, T>(l: &'a RwLock<T>) -> std::sync::RwLockWriteGuard<'a, T> {
    l.write().unwrap_or_else(|e| e.into_inner())
}

impl Store {
    /// A store that keeps nothing on disk.
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (creating if needed) a data directory and loads every bundle.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(dir.join("corpora"))?;
        let store = Self {
            dir: Some(dir.clone()),
            ..Self::default()
        };
        let mut paths: Vec<PathBuf> = fs::read_dir(dir.join("corpora"))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in paths {
            let text = fs::read_to_string(&path)?;
            let mut bundle = Bundle::from_json(&text)
                .map_err(|e| StoreError::Io(format!("{}: {e}", path.display())))?;
            for run in &mut bundle.runs {
                if run.status == RunStatus::Pending {
                    run.status = RunStatus::Failed;
                    run.error = Some(RunError::new("Interrupted", "the server stopped during the run"));
                }
            }
            store.insert_bundle(bundle, false)?;
        }
        if let Ok(latest) = fs::read_to_string(dir.join("latest")) {
            let latest = latest.trim().to_owned();
            if lock(&store.corpora).contains_key(&latest) {
                *lock_mut(&store.latest) = Some(latest);
            }
        }
        Ok(store)
    }

    pub fn data_dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn slot(&self, corpus_id: &str) -> Result<Arc<CorpusSlot>, StoreError> {
        lock(&self.corpora)
            .get(corpus_id)
            .cloned()
            .ok_or_else(|| StoreError::not_found("corpus", corpus_id))
    }

    fn slot_of_run(&self, run_id: &str) -> Result<Arc<CorpusSlot>, StoreError> {
        let corpus_id = lock(&self.run_index)
            .get(run_id)
            .cloned()
            .ok_or_else(|| StoreError::not_found("run", run_id))?;
        self.slot(&corpus_id)
    }

    pub fn corpus_ids(&self) -> Vec<String> {
        lock(&self.corpora).keys().cloned().collect()
    }

    /// The most recently ingested or imported corpus.
    pub fn latest(&self) -> Option<String> {
        lock(&self.latest).clone()
    }

    fn set_latest(&self, corpus_id: &str) -> Result<(), StoreError> {
        *lock_mut(&self.latest) = Some(corpus_id.to_owned());
        if let Some(dir) = &self.dir {
            write_atomic(dir, &dir.join("latest"), corpus_id.as_bytes())?;
        }
        Ok(())
    }

    fn persist(&self, slot: &CorpusSlot) -> Result<(), StoreError> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        let _guard = slot.persist.lock().unwrap_or_else(|e| e.into_inner());
        let bundle = slot.bundle();
        let path = dir.join("corpora").join(format!("{}.json", slot.corpus.corpus_id));
        let text = serde_json::to_vec_pretty(&bundle).expect("bundle serializes");
        write_atomic(&dir.join("corpora"), &path, &text)
    }

    pub fn corpus(&self, corpus_id: &str) -> Result<Arc<Corpus>, StoreError> {
        Ok(self.slot(corpus_id)?.corpus.clone())
    }

    /// Parses and stores a corpus. Re-ingesting identical content returns
    /// the existing id. Corpora with validation errors are rejected.
    pub fn ingest(&self, csv: &str, config: &IngestConfig) -> Result<IngestOutcome, StoreError> {
        let mut config = config.clone();
        if config.ingested_at.is_none() {
            config.ingested_at = Some(now_rfc3339());
        }
        let (corpus, report) = parse_corpus(csv, &config)?;
        if !report.is_usable() {
            return Err(StoreError::InvalidCorpus(report));
        }
        let corpus_id = corpus.corpus_id.clone();
        let studies = corpus.studies.len();
        let created = {
            let mut corpora = lock_mut(&self.corpora);
            if corpora.contains_key(&corpus_id) {
                false
            } else {
                corpora.insert(corpus_id.clone(), Arc::new(CorpusSlot::new(corpus, SlotState::default())));
                true
            }
        };
        if created {
            self.persist(&*self.slot(&corpus_id)?)?;
        }
        self.set_latest(&corpus_id)?;
        Ok(IngestOutcome {
            corpus_id,
            studies,
            created,
            report,
        })
    }

    /// Registers a pending run and returns its record.
    pub fn start_run(&self, corpus_id: &str, config: &RunConfig) -> Result<RunRecord, StoreError> {
        config.validate()?;
        let slot = self.slot(corpus_id)?;
        let record = {
            let mut state = slot.write();
            let run_id = run_id_for(corpus_id, state.runs.len() + 1);
            let record = RunRecord {
                run_id: run_id.clone(),
                corpus_id: corpus_id.to_owned(),
                status: RunStatus::Pending,
                config: config.clone(),
                digest: None,
                model: None,
                assignments: None,
                warnings: Vec::new(),
                raw_reply: None,
                error: None,
                created_at: Some(now_rfc3339()),
            };
            state.runs.push(record.clone());
            lock_mut(&self.run_index).insert(run_id, corpus_id.to_owned());
            record
        };
        self.persist(&slot)?;
        Ok(record)
    }

    /// Records the outcome of a pending run.
    pub fn finish_run(&self, run_id: &str, outcome: RunOutcome) -> Result<RunRecord, StoreError> {
        let slot = self.slot_of_run(run_id)?;
        let record = {
            let mut state = slot.write();
            let run = state
                .runs
                .iter_mut()
                .find(|r| r.run_id == run_id)
                .ok_or_else(|| StoreError::not_found("run", run_id))?;
            if run.status != RunStatus::Pending {
                return Err(StoreError::Conflict(format!("run `{run_id}` already finished")));
            }
            run.raw_reply = outcome.raw_reply;
            match outcome.result {
                Ok(TopicRun {
                    mut model,
                    assignments,
                    warnings,
                }) => {
                    model.run_meta.timestamp = Some(now_rfc3339());
                    run.digest = Some(run_digest(&model, &assignments));
                    run.model = Some(model);
                    run.assignments = Some(assignments);
                    run.warnings = warnings;
                    run.status = RunStatus::Done;
                }
                Err(e) => {
                    run.error = Some(e);
                    run.status = RunStatus::Failed;
                }
            }
            run.clone()
        };
        self.persist(&slot)?;
        Ok(record)
    }

    pub fn run(&self, run_id: &str) -> Result<RunRecord, StoreError> {
        let slot = self.slot_of_run(run_id)?;
        let state = slot.read();
        state
            .runs
            .iter()
            .find(|r| r.run_id == run_id)
            .cloned()
            .ok_or_else(|| StoreError::not_found("run", run_id))
    }

    pub fn runs(&self, corpus_id: &str) -> Result<Vec<RunRecord>, StoreError> {
        Ok(self.slot(corpus_id)?.read().runs.clone())
    }

    /// The lock that keeps LLM runs on one corpus sequential.
    pub fn llm_lock(&self, corpus_id: &str) -> Result<Arc<tokio::sync::Mutex<()>>, StoreError> {
        Ok(self.slot(corpus_id)?.llm_lock.clone())
    }

    /// Builds an atlas from a finished run and makes it the active one.
    /// With `expected_version`, fails with a conflict unless the current
    /// atlas version (or its absence, for `""`) matches.
    pub fn promote(
        &self,
        corpus_id: &str,
        run_id: &str,
        expected_version: Option<&str>,
    ) -> Result<String, StoreError> {
        let slot = self.slot(corpus_id)?;
        let (model, assignments, ratio) = {
            let state = slot.read();
            let run = state
                .runs
                .iter()
                .find(|r| r.run_id == run_id)
                .ok_or_else(|| StoreError::not_found("run", run_id))?;
            match (run.status, &run.model, &run.assignments) {
                (RunStatus::Done, Some(m), Some(a)) => (m.clone(), a.clone(), run.config.co_label_ratio),
                _ => {
                    return Err(StoreError::Conflict(format!(
                        "run `{run_id}` has not finished successfully"
                    )))
                }
            }
        };
        let atlas = EvidenceAtlas::build_with_ratio(slot.corpus.clone(), model, assignments, ratio)?;
        let layout = compute_layout(&atlas, &LayoutConfig::default()).ok();
        let version = atlas.version().to_owned();
        {
            let mut state = slot.write();
            let current = state.atlas.as_ref().map(|a| a.version()).unwrap_or("");
            if let Some(expected) = expected_version {
                if expected != current {
                    return Err(StoreError::Conflict(format!(
                        "stale atlas version `{expected}`, current is `{current}`"
                    )));
                }
            }
            state.atlas = Some(Arc::new(atlas));
            state.active_run = Some(run_id.to_owned());
            state.layout = layout;
        }
        self.persist(&slot)?;
        Ok(version)
    }

    /// The active atlas snapshot.
    pub fn atlas(&self, corpus_id: &str) -> Result<Arc<EvidenceAtlas>, StoreError> {
        self.slot(corpus_id)?
            .read()
            .atlas
            .clone()
            .ok_or_else(|| StoreError::not_found("atlas for corpus", corpus_id))
    }

    pub fn map(&self, corpus_id: &str, config: &LayoutConfig) -> Result<MapPayload, StoreError> {
        let atlas = self.atlas(corpus_id)?;
        let layout = compute_layout(&atlas, config)?;
        Ok(map_payload(&atlas, layout))
    }

    /// Records `layout` as the corpus's stored layout.
    pub fn set_layout(&self, corpus_id: &str, layout: MapLayout) -> Result<(), StoreError> {
        let slot = self.slot(corpus_id)?;
        slot.write().layout = Some(layout);
        self.persist(&slot)
    }

    /// Compares finished runs and caches the report in the bundle.
    pub fn stability(&self, corpus_id: &str, run_ids: &[String]) -> Result<StabilityReport, StoreError> {
        let slot = self.slot(corpus_id)?;
        let runs: Vec<RunRecord> = {
            let state = slot.read();
            run_ids
                .iter()
                .map(|id| {
                    state
                        .runs
                        .iter()
                        .find(|r| &r.run_id == id)
                        .cloned()
                        .ok_or_else(|| StoreError::not_found("run", id.as_str()))
                })
                .collect::<Result<_, _>>()?
        };
        let mut refs: Vec<RunRef<'_>> = Vec::with_capacity(runs.len());
        for run in &runs {
            match (&run.model, &run.assignments) {
                (Some(m), Some(a)) => refs.push((run.run_id.as_str(), m, a)),
                _ => {
                    return Err(StoreError::Conflict(format!(
                        "run `{}` has not finished successfully",
                        run.run_id
                    )))
                }
            }
        }
        let report = stability_report(&refs)?;
        slot.write().stability = Some(report.clone());
        self.persist(&slot)?;
        Ok(report)
    }

    pub fn export(&self, corpus_id: &str) -> Result<Bundle, StoreError> {
        Ok(self.slot(corpus_id)?.bundle())
    }

    /// Imports a bundle as a corpus. A corpus id already in the store is
    /// suffixed, and run ids are re-derived for the new id.
    pub fn import(&self, bundle: Bundle) -> Result<String, StoreError> {
        if bundle.format_version > FORMAT_VERSION {
            return Err(StoreError::BadRequest(format!(
                "bundle format_version {} is newer than supported version {FORMAT_VERSION}",
                bundle.format_version
            )));
        }
        let corpus_id = self.insert_bundle(bundle, true)?;
        self.set_latest(&corpus_id)?;
        Ok(corpus_id)
    }

    fn insert_bundle(&self, mut bundle: Bundle, persist: bool) -> Result<String, StoreError> {
        let original = bundle.corpus.corpus_id.clone();
        let mut corpora = lock_mut(&self.corpora);
        let mut corpus_id = original.clone();
        let mut n = 2;
        while corpora.contains_key(&corpus_id) {
            corpus_id = format!("{original}-{n}");
            n += 1;
        }
        let renamed = corpus_id != original;
        let mut id_map = BTreeMap::new();
        for (i, run) in bundle.runs.iter_mut().enumerate() {
            let new_id = run_id_for(&corpus_id, i + 1);
            id_map.insert(run.run_id.clone(), new_id.clone());
            run.run_id = new_id;
            run.corpus_id = corpus_id.clone();
        }
        let remap = |id: &String| {
            id_map
                .get(id)
                .cloned()
                .ok_or_else(|| StoreError::BadRequest(format!("bundle refers to unknown run `{id}`")))
        };
        let active_run = bundle.active_run.as_ref().map(remap).transpose()?;
        if let Some(report) = &mut bundle.stability {
            report.run_ids = report.run_ids.iter().map(remap).collect::<Result<_, _>>()?;
        }
        bundle.corpus.corpus_id = corpus_id.clone();
        let corpus = Arc::new(bundle.corpus);

        let atlas = match &active_run {
            None => None,
            Some(run_id) => {
                let run = bundle.runs.iter().find(|r| &r.run_id == run_id).expect("remapped id");
                let (Some(model), Some(assignments)) = (&run.model, &run.assignments) else {
                    return Err(StoreError::BadRequest(format!(
                        "active run `{run_id}` has no model"
                    )));
                };
                let atlas = EvidenceAtlas::build_with_ratio(
                    corpus.clone(),
                    model.clone(),
                    assignments.clone(),
                    run.config.co_label_ratio,
                )
                .map_err(|e| StoreError::BadRequest(format!("bundle: {e}")))?;
                if !renamed && bundle.atlas_version.as_deref() != Some(atlas.version()) {
                    return Err(StoreError::BadRequest(
                        "bundle atlas_version does not match its contents".into(),
                    ));
                }
                Some(Arc::new(atlas))
            }
        };

        let mut index = lock_mut(&self.run_index);
        for run in &bundle.runs {
            index.insert(run.run_id.clone(), corpus_id.clone());
        }
        drop(index);
        let slot = Arc::new(CorpusSlot {
            corpus,
            state: RwLock::new(SlotState {
                runs: bundle.runs,
                active_run,
                atlas,
                layout: bundle.layout,
                stability: bundle.stability,
            }),
            persist: Mutex::new(()),
            llm_lock: Arc::new(tokio::sync::Mutex::new(())),
        });
        corpora.insert(corpus_id.clone(), slot.clone());
        drop(corpora);
        if persist {
            self.persist(&slot)?;
        }
        Ok(corpus_id)
    }
}

pub fn map_payload(atlas: &EvidenceAtlas, layout: MapLayout) -> MapPayload {
    let topics = atlas
        .topics()
        .iter()
        .map(|t| MapTopic {
            topic_id: t.topic_id.clone(),
            label: t.label.clone(),
            description: atlas
                .model()
                .topic(&t.topic_id)
                .map(|m| m.description.clone())
                .unwrap_or_default(),
            palette_index: t.palette_index,
            count: t.members.count(),
            subtopics: t
                .subtopics
                .iter()
                .map(|(id, label, members)| MapSubtopic {
                    subtopic_id: id.clone(),
                    label: label.clone(),
                    count: members.count(),
                })
                .collect(),
        })
        .collect();
    MapPayload {
        corpus_id: atlas.corpus().corpus_id.clone(),
        atlas_version: atlas.version().to_owned(),
        total: atlas.len(),
        layout,
        topics,
        facets: atlas.corpus().facets().cloned().collect(),
    }
}

fn write_atomic(dir: &Path, path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| StoreError::Io(e.to_string()))?;
    Ok(())
}
