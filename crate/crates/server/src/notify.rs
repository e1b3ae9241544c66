//! Emails about new escalations and new feedback, sent off the request
//! path by a background worker.

use std::sync::{Arc, Mutex, Weak};
use std::time::Duration;

use async_trait::async_trait;
use hintdesk_core::{
    EscalationId, EventBody, EventObserver, EventRecord, HelpDesk, QuestionId, StudentId, Timestamp,
};
use lettre::message::Mailbox;
use lettre::{AsyncSmtpTransport, AsyncTransport, Tokio1Executor};
use serde::{Deserialize, Serialize};
use tokio::sync::mpsc;
use tokio::task::JoinHandle;
use tracing::{info, warn};

use crate::config::{MailConfig, NotifierKind, NotifyConfig};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipient {
    InstructorList,
    /// Routed to the student's address; never named in the message.
    Student(StudentId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    NewEscalation,
    FeedbackAvailable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeliveryState {
    Queued,
    Sent,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NotificationJob {
    pub job_id: u64,
    pub kind: JobKind,
    pub escalation_id: EscalationId,
    pub recipient: Recipient,
    pub created_at: Timestamp,
    pub delivery_state: DeliveryState,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub to: Recipient,
    pub subject: String,
    pub body: String,
}

#[async_trait]
pub trait Notifier: Send + Sync {
    async fn send(&self, message: &Message) -> Result<(), String>;
}

/// Writes each message to the log and keeps a copy.
#[derive(Debug, Default)]
pub struct LogNotifier {
    sent: Mutex<Vec<Message>>,
}

impl LogNotifier {
    pub fn sent(&self) -> Vec<Message> {
        self.sent.lock().unwrap().clone()
    }
}

#[async_trait]
impl Notifier for LogNotifier {
    async fn send(&self, message: &Message) -> Result<(), String> {
        info!(subject = %message.subject, body = %message.body, "notification");
        self.sent.lock().unwrap().push(message.clone());
        Ok(())
    }
}

/// Sends through an SMTP relay.
pub struct MailNotifier {
    transport: AsyncSmtpTransport<Tokio1Executor>,
    from: Mailbox,
    instructors: Vec<Mailbox>,
    student_address: String,
}

impl MailNotifier {
    pub fn new(config: &MailConfig) -> Result<Self, String> {
        let parse = |a: &str| {
            a.parse::<Mailbox>()
                .map_err(|e| format!("bad address {a:?}: {e}"))
        };
        if !config.student_address.contains("{student}") {
            return Err("mail.student_address must contain {student}".into());
        }
        Ok(Self {
            transport: AsyncSmtpTransport::<Tokio1Executor>::builder_dangerous(&config.smtp_host)
                .port(config.smtp_port)
                .timeout(Some(Duration::from_secs(10)))
                .build(),
            from: parse(&config.from)?,
            instructors: config
                .instructors
                .iter()
                .map(|a| parse(a))
                .collect::<Result<_, _>>()?,
            student_address: config.student_address.clone(),
        })
    }
}

#[async_trait]
impl Notifier for MailNotifier {
    async fn send(&self, message: &Message) -> Result<(), String> {
        let mut builder = lettre::Message::builder()
            .from(self.from.clone())
            .subject(&message.subject);
        match &message.to {
            Recipient::InstructorList => {
                if self.instructors.is_empty() {
                    return Err("no instructor addresses configured".into());
                }
                for to in &self.instructors {
                    builder = builder.to(to.clone());
                }
            }
            Recipient::Student(id) => {
                let address = self.student_address.replace("{student}", id.as_str());
                builder = builder.to(address
                    .parse()
                    .map_err(|e| format!("bad student address: {e}"))?);
            }
        }
        let email = builder
            .body(message.body.clone())
            .map_err(|e| e.to_string())?;
        self.transport
            .send(email)
            .await
            .map(|_| ())
            .map_err(|e| e.to_string())
    }
}

pub fn build_notifier(config: &NotifyConfig) -> Result<Arc<dyn Notifier>, String> {
    Ok(match config.adapter {
        NotifierKind::Log => Arc::new(LogNotifier::default()),
        NotifierKind::Mail => Arc::new(MailNotifier::new(&config.mail)?),
    })
}

/// Message text. Names no student and no instructor.
pub fn compose(kind: JobKind, to: Recipient, question: Option<&QuestionId>) -> Message {
    let (subject, body) = match kind {
        JobKind::NewEscalation => (
            "New escalated hint request".to_owned(),
            "A student asked for instructor help after an unhelpful AI hint. \
             Open the instructor console to review the oldest unresolved request."
                .to_owned(),
        ),
        JobKind::FeedbackAvailable => (
            "Instructor feedback is available".to_owned(),
            match question {
                Some(q) => format!(
                    "An instructor has answered your escalated hint request for question {q}. \
                     Open the hint panel for that question to read it."
                ),
                None => "An instructor has answered your escalated hint request. \
                         Open the hint panel to read it."
                    .to_owned(),
            },
        ),
    };
    Message { to, subject, body }
}

/// Runs one job: the first attempt plus up to `retries` more.
pub async fn notify(
    job: &mut NotificationJob,
    message: &Message,
    notifier: &dyn Notifier,
    retries: u32,
    delay: Duration,
) -> DeliveryState {
    loop {
        job.attempts += 1;
        match notifier.send(message).await {
            Ok(()) => {
                job.delivery_state = DeliveryState::Sent;
                break;
            }
            Err(e) if job.attempts > retries => {
                warn!(job = job.job_id, attempts = job.attempts, error = %e, "notification failed");
                job.delivery_state = DeliveryState::Failed;
                break;
            }
            Err(e) => {
                warn!(job = job.job_id, attempts = job.attempts, error = %e, "retrying notification");
                tokio::time::sleep(delay).await;
            }
        }
    }
    job.delivery_state
}

/// Every job ever queued, with its current state.
#[derive(Debug, Clone, Default)]
pub struct JobBook(Arc<Mutex<Vec<NotificationJob>>>);

impl JobBook {
    pub fn jobs(&self) -> Vec<NotificationJob> {
        self.0.lock().unwrap().clone()
    }

    fn push(&self, job: NotificationJob) {
        self.0.lock().unwrap().push(job);
    }

    fn update(&self, job: &NotificationJob) {
        if let Some(slot) = self
            .0
            .lock()
            .unwrap()
            .iter_mut()
            .find(|j| j.job_id == job.job_id)
        {
            *slot = job.clone();
        }
    }

    /// Jobs still queued.
    pub fn pending(&self) -> usize {
        self.0
            .lock()
            .unwrap()
            .iter()
            .filter(|j| j.delivery_state == DeliveryState::Queued)
            .count()
    }
}

/// Turns escalation and feedback events into jobs. Runs under the desk's
/// lock, so it only records and hands off.
struct JobObserver {
    tx: mpsc::UnboundedSender<u64>,
    book: JobBook,
    next_id: Mutex<u64>,
}

impl EventObserver for JobObserver {
    fn observe(&self, record: &EventRecord) {
        let (kind, escalation_id) = match &record.body {
            EventBody::Escalated { escalation } => {
                (JobKind::NewEscalation, escalation.escalation_id.clone())
            }
            EventBody::FeedbackSubmitted { feedback } => {
                (JobKind::FeedbackAvailable, feedback.escalation_id.clone())
            }
            _ => return,
        };
        let job_id = {
            let mut next = self.next_id.lock().unwrap();
            *next += 1;
            *next
        };
        self.book.push(NotificationJob {
            job_id,
            kind,
            escalation_id,
            recipient: Recipient::InstructorList,
            created_at: record.ts,
            delivery_state: DeliveryState::Queued,
            attempts: 0,
        });
        let _ = self.tx.send(job_id);
    }
}

/// Student and question behind an escalation.
fn requester(desk: &HelpDesk, escalation_id: &EscalationId) -> Option<(StudentId, QuestionId)> {
    desk.read(|s| {
        let escalation = s.escalation(escalation_id)?;
        let request = s.request_for_escalation(escalation)?;
        Some((request.student_id.clone(), request.question_id.clone()))
    })
}

/// Hooks notifications into `desk` and starts the worker.
pub fn start(
    desk: &Arc<HelpDesk>,
    notifier: Arc<dyn Notifier>,
    config: &NotifyConfig,
) -> (JobBook, JoinHandle<()>) {
    let (tx, mut rx) = mpsc::unbounded_channel();
    let book = JobBook::default();
    desk.add_observer(Arc::new(JobObserver {
        tx,
        book: book.clone(),
        next_id: Mutex::new(0),
    }));
    let weak: Weak<HelpDesk> = Arc::downgrade(desk);
    let retries = config.retries;
    let delay = Duration::from_millis(config.retry_delay_ms);
    let worker_book = book.clone();
    let handle = tokio::spawn(async move {
        while let Some(job_id) = rx.recv().await {
            let Some(desk) = weak.upgrade() else { break };
            let Some(mut job) = worker_book.jobs().into_iter().find(|j| j.job_id == job_id) else {
                continue;
            };
            let message = match job.kind {
                JobKind::NewEscalation => compose(job.kind, Recipient::InstructorList, None),
                JobKind::FeedbackAvailable => match requester(&desk, &job.escalation_id) {
                    Some((student, question)) => {
                        job.recipient = Recipient::Student(student.clone());
                        compose(job.kind, Recipient::Student(student), Some(&question))
                    }
                    None => {
                        job.delivery_state = DeliveryState::Failed;
                        worker_book.update(&job);
                        continue;
                    }
                },
            };
            drop(desk);
            let (notifier, book) = (notifier.clone(), worker_book.clone());
            tokio::spawn(async move {
                notify(&mut job, &message, notifier.as_ref(), retries, delay).await;
                book.update(&job);
            });
        }
    });
    (book, handle)
}
