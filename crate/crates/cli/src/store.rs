//! On-disk layout of a campaign directory.
//!
//! ```text
//! campaign.toml   configuration
//! qrels.txt       graded judgments the pools come from
//! docs.tsv        doc_id<TAB>passage text
//! questions.tsv   topic_id<TAB>question text
//! ledger.jsonl    every accepted or rejected judgment, append-only
//! batches.jsonl   issued batches, including challenge items
//! ```
//!
//! The ledger is the source of truth; the campaign state is rebuilt by
//! replaying it.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use compat_core::campaign::{Campaign, CampaignConfig, HitBatch, Pair};
use compat_core::trec_io::{read_graded_qrels, read_ledger, Ledger};
use compat_core::{GradedQrels, JudgmentRecord};

pub const CONFIG_FILE: &str = "campaign.toml";
pub const QRELS_FILE: &str = "qrels.txt";
pub const DOCS_FILE: &str = "docs.tsv";
pub const QUESTIONS_FILE: &str = "questions.tsv";
pub const LEDGER_FILE: &str = "ledger.jsonl";
pub const MANIFEST_FILE: &str = "batches.jsonl";

#[derive(Debug, Clone)]
pub struct CampaignDir {
    root: PathBuf,
}

impl CampaignDir {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let dir = CampaignDir { root: root.into() };
        if !dir.path(CONFIG_FILE).is_file() {
            bail!("{} is not a campaign directory (no {CONFIG_FILE})", dir.root.display());
        }
        Ok(dir)
    }

    /// Creates the directory and its files. Fails if a campaign exists there.
    pub fn init(
        root: impl Into<PathBuf>,
        config: &CampaignConfig,
        grades: &GradedQrels,
        docs: Option<&Path>,
        questions: Option<&Path>,
    ) -> Result<Self> {
        let dir = CampaignDir { root: root.into() };
        if dir.path(CONFIG_FILE).exists() {
            bail!("{} already holds a campaign", dir.root.display());
        }
        config.validate()?;
        fs::create_dir_all(&dir.root).with_context(|| format!("creating {}", dir.root.display()))?;
        for (src, name) in [(docs, DOCS_FILE), (questions, QUESTIONS_FILE)] {
            match src {
                Some(src) => {
                    read_text_map(src)?;
                    fs::copy(src, dir.path(name)).with_context(|| format!("copying {}", src.display()))?;
                }
                None => write_file(&dir.path(name), "")?,
            }
        }
        write_file(&dir.path(QRELS_FILE), &grades.to_trec_string())?;
        write_file(&dir.path(LEDGER_FILE), "")?;
        write_file(&dir.path(MANIFEST_FILE), "")?;
        write_file(&dir.path(CONFIG_FILE), &config.to_toml())?;
        Ok(dir)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn config(&self) -> Result<CampaignConfig> {
        Ok(CampaignConfig::load(&self.path(CONFIG_FILE))?)
    }

    pub fn grades(&self) -> Result<GradedQrels> {
        Ok(read_graded_qrels(&self.path(QRELS_FILE))?)
    }

    pub fn records(&self) -> Result<Vec<JudgmentRecord>> {
        Ok(read_ledger(&self.path(LEDGER_FILE))?)
    }

    /// Campaign state replayed from the ledger.
    pub fn load(&self) -> Result<Campaign> {
        let campaign = Campaign::replay(self.config()?, &self.grades()?, &self.records()?)
            .with_context(|| format!("replaying {}", self.path(LEDGER_FILE).display()))?;
        Ok(campaign)
    }

    pub fn ledger(&self) -> Result<Ledger> {
        Ok(Ledger::open(self.path(LEDGER_FILE))?)
    }

    pub fn manifest(&self) -> Result<Vec<HitBatch>> {
        let path = self.path(MANIFEST_FILE);
        if !path.exists() {
            return Ok(Vec::new());
        }
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1)))
            .collect()
    }

    pub fn append_manifest(&self, batches: &[HitBatch]) -> Result<()> {
        if batches.is_empty() {
            return Ok(());
        }
        let path = self.path(MANIFEST_FILE);
        let mut buf = String::new();
        for b in batches {
            buf.push_str(&serde_json::to_string(b)?);
            buf.push('\n');
        }
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .with_context(|| format!("opening {}", path.display()))?;
        file.write_all(buf.as_bytes())?;
        file.sync_data()?;
        Ok(())
    }

    pub fn docs(&self) -> Result<BTreeMap<String, String>> {
        read_text_map(&self.path(DOCS_FILE))
    }

    pub fn questions(&self) -> Result<BTreeMap<String, String>> {
        read_text_map(&self.path(QUESTIONS_FILE))
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Reads `id<TAB>text` lines. `\n` and `\t` escapes in the text are
/// expanded; blank lines and lines starting with `#` are skipped.
pub fn read_text_map(path: &Path) -> Result<BTreeMap<String, String>> {
    if !path.exists() {
        return Ok(BTreeMap::new());
    }
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((id, body)) = line.split_once('\t') else {
            bail!("{}:{}: expected id<TAB>text", path.display(), i + 1);
        };
        let body = body.replace("\\n", "\n").replace("\\t", "\t");
        if map.insert(id.trim().to_string(), body).is_some() {
            bail!("{}:{}: duplicate id {:?}", path.display(), i + 1, id.trim());
        }
    }
    Ok(map)
}

/// Issued batches still worth answering: not yet submitted, from the
/// topic's current stage and holding at least one pending pair. Later
/// copies of a batch id are dropped.
pub fn open_batches<'a>(campaign: &Campaign, manifest: &'a [HitBatch]) -> Vec<&'a HitBatch> {
    let pending = pending_by_topic(campaign);
    let mut seen = BTreeSet::new();
    manifest
        .iter()
        .filter(|b| seen.insert(b.batch_id.as_str()))
        .filter(|b| !campaign.has_batch(&b.batch_id))
        .filter(|b| campaign.stage_tag(&b.topic).is_ok_and(|tag| tag == b.stage))
        .filter(|b| {
            let pending = &pending[&b.topic];
            b.real_pairs().any(|p| pending.contains(&p))
        })
        .collect()
}

/// Pending pairs per topic that no open batch covers.
pub fn unissued(campaign: &Campaign, manifest: &[HitBatch]) -> BTreeMap<String, BTreeSet<Pair>> {
    let mut out = pending_by_topic(campaign);
    for batch in open_batches(campaign, manifest) {
        let pending = out.get_mut(&batch.topic).expect("known topic");
        for pair in batch.real_pairs() {
            pending.remove(&pair);
        }
    }
    out
}

/// New batches for every pending pair not covered by an open batch.
pub fn issue_batches(campaign: &Campaign, manifest: &[HitBatch]) -> Result<Vec<HitBatch>> {
    let known: BTreeSet<&str> = manifest.iter().map(|b| b.batch_id.as_str()).collect();
    let covered = covered_by_topic(campaign, manifest);
    let generation = manifest.len() as u64;
    let mut fresh = Vec::new();
    for topic in campaign.topics().keys() {
        let batches = campaign.next_batches(topic, &covered[topic], generation)?;
        fresh.extend(batches.into_iter().filter(|b| !known.contains(b.batch_id.as_str())));
    }
    Ok(fresh)
}

fn pending_by_topic(campaign: &Campaign) -> BTreeMap<String, BTreeSet<Pair>> {
    campaign
        .topics()
        .keys()
        .map(|t| (t.clone(), campaign.pending_pairs(t).expect("known topic").into_iter().collect()))
        .collect()
}

fn covered_by_topic(campaign: &Campaign, manifest: &[HitBatch]) -> BTreeMap<String, BTreeSet<Pair>> {
    let mut out: BTreeMap<String, BTreeSet<Pair>> =
        campaign.topics().keys().map(|t| (t.clone(), BTreeSet::new())).collect();
    for batch in open_batches(campaign, manifest) {
        out.get_mut(&batch.topic).expect("known topic").extend(batch.real_pairs());
    }
    out
}
