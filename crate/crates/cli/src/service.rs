//! Live judging over HTTP.
//!
//! Every request locks one [`ServiceState`], so mutations are applied one
//! at a time and reads see a consistent snapshot. Assessors lease whole
//! batches: a crowd HIT with its challenge items, or a single tournament
//! match. Items are handed out one per `GET /next-pair`; answers are
//! buffered in the lease and the batch goes to the ledger in one write when
//! its last answer arrives. Tournament batches hold one match, so each
//! judgment is written immediately and unlocks the matches that depend on
//! it.
//!
//! | route              | body                                              |
//! |--------------------|---------------------------------------------------|
//! | `GET /next-pair?assessor=ID` | `{pair_id, topic, question, passage_a, passage_b, token}`, 204 when nothing is pending |
//! | `POST /judgment`   | `{pair_id, token, winner: "a" \| "b"}`            |
//! | `GET /progress`    | per-topic stage and counts                        |
//! | `GET /export`      | finalized topics as preference qrels (text)       |

use std::collections::{BTreeMap, BTreeSet};
use std::net::SocketAddr;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Result;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use compat_core::campaign::{derive_seed, BatchOutcome, Campaign, HitBatch, Submission};
use compat_core::trec_io::Ledger;
use compat_core::DocId;
use log::{info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::campaign_cmd::{side_to_doc, worker_item};
use crate::store::{issue_batches, open_batches, CampaignDir};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("assessor {0:?} is excluded from this campaign")]
    Excluded(String),
    #[error("unknown lease token")]
    UnknownToken,
    #[error("lease has expired")]
    Expired,
    #[error("pair {0:?} was already judged under this lease")]
    Duplicate(String),
    #[error("pair {0:?} has not been issued under this lease")]
    NotIssued(String),
    #[error("{0}")]
    BadRequest(String),
    #[error(transparent)]
    Internal(#[from] anyhow::Error),
}

impl ServiceError {
    fn status(&self) -> StatusCode {
        match self {
            ServiceError::Excluded(_) => StatusCode::FORBIDDEN,
            ServiceError::Expired | ServiceError::Duplicate(_) => StatusCode::CONFLICT,
            ServiceError::UnknownToken | ServiceError::NotIssued(_) | ServiceError::BadRequest(_) => {
                StatusCode::BAD_REQUEST
            }
            ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            warn!("{self:#}");
        }
        (status, Json(serde_json::json!({ "error": self.to_string() }))).into_response()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NextPair {
    pub pair_id: String,
    pub topic: String,
    pub question: String,
    pub passage_a: String,
    pub passage_b: String,
    pub token: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentRequest {
    pub pair_id: String,
    pub token: String,
    pub winner: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentAck {
    pub recorded: bool,
    /// True when this answer completed the leased batch.
    pub batch_complete: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicProgress {
    pub topic: String,
    pub stage: String,
    pub pool_size: usize,
    pub pending: usize,
    pub judgments: usize,
    /// Result groups, best first, once the topic is finalized.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top_k: Option<Vec<Vec<DocId>>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub complete: bool,
    pub active_leases: usize,
    pub excluded_assessors: usize,
    pub topics: Vec<TopicProgress>,
}

#[derive(Debug)]
struct Lease {
    assessor: String,
    batch: HitBatch,
    /// Items handed out so far, a prefix of `batch.items`.
    issued: usize,
    answers: BTreeMap<String, DocId>,
    expires: u64,
}

#[derive(Debug, Clone, Copy)]
enum Closed {
    Expired,
    Completed,
}

/// Campaign state plus open leases. All times are milliseconds since the
/// Unix epoch and are passed in explicitly.
pub struct ServiceState {
    dir: CampaignDir,
    campaign: Campaign,
    ledger: Ledger,
    manifest: Vec<HitBatch>,
    docs: BTreeMap<String, String>,
    questions: BTreeMap<String, String>,
    leases: BTreeMap<String, Lease>,
    closed: BTreeMap<String, Closed>,
    token_salt: u64,
    tokens_issued: u64,
}

impl ServiceState {
    pub fn open(dir: CampaignDir, token_salt: u64) -> Result<Self> {
        Ok(ServiceState {
            campaign: dir.load()?,
            ledger: dir.ledger()?,
            manifest: dir.manifest()?,
            docs: dir.docs()?,
            questions: dir.questions()?,
            dir,
            leases: BTreeMap::new(),
            closed: BTreeMap::new(),
            token_salt,
            tokens_issued: 0,
        })
    }

    pub fn campaign(&self) -> &Campaign {
        &self.campaign
    }

    fn lease_ms(&self) -> u64 {
        self.campaign.config().lease_timeout_secs.saturating_mul(1000)
    }

    fn expire(&mut self, now: u64) {
        let expired: Vec<String> = self.leases.iter().filter(|(_, l)| l.expires <= now).map(|(t, _)| t.clone()).collect();
        for token in expired {
            let lease = self.leases.remove(&token).expect("listed above");
            info!("lease on {} by {} expired", lease.batch.batch_id, lease.assessor);
            self.closed.insert(token, Closed::Expired);
        }
    }

    fn view(&self, token: &str, index: usize) -> NextPair {
        let lease = &self.leases[token];
        let item = worker_item(&lease.batch, index, &self.docs, &self.questions);
        NextPair {
            pair_id: item.pair_id,
            topic: item.topic,
            question: item.question,
            passage_a: item.passage_a,
            passage_b: item.passage_b,
            token: token.to_string(),
        }
    }

    /// An open batch nobody holds, issuing new batches when none is left.
    fn free_batch(&mut self) -> Result<Option<HitBatch>> {
        for attempt in 0..2 {
            let leased: BTreeSet<&str> = self.leases.values().map(|l| l.batch.batch_id.as_str()).collect();
            let free = open_batches(&self.campaign, &self.manifest)
                .into_iter()
                .find(|b| !leased.contains(b.batch_id.as_str()))
                .cloned();
            if free.is_some() || attempt == 1 {
                return Ok(free);
            }
            let fresh = issue_batches(&self.campaign, &self.manifest)?;
            if fresh.is_empty() {
                return Ok(None);
            }
            self.dir.append_manifest(&fresh)?;
            self.manifest.extend(fresh);
        }
        Ok(None)
    }

    /// The assessor's next item: an unanswered item already handed out, the
    /// next item of their batch, or the first item of a newly leased batch.
    pub fn next_pair(&mut self, assessor: &str, now: u64) -> Result<Option<NextPair>, ServiceError> {
        if assessor.trim().is_empty() {
            return Err(ServiceError::BadRequest("assessor id is required".into()));
        }
        self.expire(now);
        if self.campaign.excluded().contains(assessor) {
            return Err(ServiceError::Excluded(assessor.to_string()));
        }
        let held = self.leases.iter().find(|(_, l)| l.assessor == assessor).map(|(t, _)| t.clone());
        if let Some(token) = held {
            let lease = self.leases.get_mut(&token).expect("found above");
            let index = match (0..lease.issued).find(|&i| !lease.answers.contains_key(&lease.batch.items[i].pair_id)) {
                Some(i) => i,
                None => {
                    lease.issued += 1;
                    lease.issued - 1
                }
            };
            return Ok(Some(self.view(&token, index)));
        }
        let Some(batch) = self.free_batch()? else {
            return Ok(None);
        };
        self.tokens_issued += 1;
        let token = format!("{:016x}", derive_seed(self.token_salt, &format!("{}/{assessor}", self.tokens_issued)));
        info!("{assessor} leased {}", batch.batch_id);
        let expires = now.saturating_add(self.lease_ms());
        self.leases.insert(
            token.clone(),
            Lease {
                assessor: assessor.to_string(),
                batch,
                issued: 1,
                answers: BTreeMap::new(),
                expires,
            },
        );
        Ok(Some(self.view(&token, 0)))
    }

    /// Records one answer. The batch is written to the ledger, and the
    /// campaign advanced, once every item has an answer.
    pub fn judgment(&mut self, req: &JudgmentRequest, now: u64) -> Result<JudgmentAck, ServiceError> {
        let Some(lease) = self.leases.get_mut(&req.token) else {
            return Err(match self.closed.get(&req.token) {
                Some(Closed::Expired) => ServiceError::Expired,
                Some(Closed::Completed) => ServiceError::Duplicate(req.pair_id.clone()),
                None => ServiceError::UnknownToken,
            });
        };
        if lease.expires <= now {
            self.expire(now);
            return Err(ServiceError::Expired);
        }
        let Some(index) = lease.batch.items.iter().position(|i| i.pair_id == req.pair_id) else {
            return Err(ServiceError::NotIssued(req.pair_id.clone()));
        };
        if index >= lease.issued {
            return Err(ServiceError::NotIssued(req.pair_id.clone()));
        }
        if lease.answers.contains_key(&req.pair_id) {
            return Err(ServiceError::Duplicate(req.pair_id.clone()));
        }
        let doc = side_to_doc(&lease.batch, &req.pair_id, &req.winner).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        lease.answers.insert(req.pair_id.clone(), doc);
        lease.expires = now.saturating_add(self.campaign.config().lease_timeout_secs.saturating_mul(1000));
        if lease.answers.len() < lease.batch.items.len() {
            return Ok(JudgmentAck {
                recorded: true,
                batch_complete: false,
            });
        }

        let lease = self.leases.remove(&req.token).expect("held above");
        self.closed.insert(req.token.clone(), Closed::Completed);
        let submission = Submission {
            assessor: lease.assessor.clone(),
            answers: lease.answers,
        };
        let records = lease.batch.records(&submission, now);
        let mut next = self.campaign.clone();
        let outcome = next.apply(&records).map_err(anyhow::Error::from)?;
        match outcome {
            BatchOutcome::Applied { .. } | BatchOutcome::Rejected { .. } => {
                self.ledger.append_all(&records).map_err(anyhow::Error::from)?;
                self.campaign = next;
                info!("{} submitted {}: {outcome:?}", lease.assessor, lease.batch.batch_id);
            }
            BatchOutcome::Duplicate | BatchOutcome::Refused => {
                info!("{} submitted {}: {outcome:?}, not recorded", lease.assessor, lease.batch.batch_id);
            }
        }
        Ok(JudgmentAck {
            recorded: true,
            batch_complete: true,
        })
    }

    pub fn progress(&self) -> Progress {
        let topics = self
            .campaign
            .status()
            .into_iter()
            .map(|s| TopicProgress {
                top_k: self
                    .campaign
                    .top_k(&s.topic)
                    .map(|r| r.groups.iter().map(|g| g.iter().cloned().collect()).collect()),
                topic: s.topic,
                stage: s.stage,
                pool_size: s.pool_size,
                pending: s.pending,
                judgments: s.judgments,
            })
            .collect();
        Progress {
            complete: self.campaign.is_complete(),
            active_leases: self.leases.len(),
            excluded_assessors: self.campaign.excluded().len(),
            topics,
        }
    }

    pub fn export(&self) -> String {
        self.campaign.to_preference_qrels().to_trec_string()
    }
}

#[derive(Clone)]
pub struct Service {
    state: Arc<Mutex<ServiceState>>,
}

impl Service {
    pub fn new(state: ServiceState) -> Self {
        Service {
            state: Arc::new(Mutex::new(state)),
        }
    }

    pub fn lock(&self) -> MutexGuard<'_, ServiceState> {
        self.state.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
    }
}

pub fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

#[derive(Debug, Deserialize)]
struct NextPairQuery {
    assessor: String,
}

async fn next_pair(State(service): State<Service>, Query(q): Query<NextPairQuery>) -> Result<Response, ServiceError> {
    match service.lock().next_pair(&q.assessor, now_ms())? {
        Some(pair) => Ok(Json(pair).into_response()),
        None => Ok(StatusCode::NO_CONTENT.into_response()),
    }
}

async fn judgment(State(service): State<Service>, Json(req): Json<JudgmentRequest>) -> Result<Json<JudgmentAck>, ServiceError> {
    Ok(Json(service.lock().judgment(&req, now_ms())?))
}

async fn progress(State(service): State<Service>) -> Json<Progress> {
    Json(service.lock().progress())
}

async fn export(State(service): State<Service>) -> String {
    service.lock().export()
}

pub fn router(service: Service) -> Router {
    Router::new()
        .route("/next-pair", get(next_pair))
        .route("/judgment", post(judgment))
        .route("/progress", get(progress))
        .route("/export", get(export))
        .with_state(service)
}

pub async fn serve(dir: CampaignDir, bind: SocketAddr) -> Result<()> {
    let state = ServiceState::open(dir, now_ms())?;
    let app = router(Service::new(state));
    let listener = tokio::net::TcpListener::bind(bind).await?;
    info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
