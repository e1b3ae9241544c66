use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use async_trait::async_trait;
use hintdesk_core::{
    DeskConfig, HelpDesk, HelpRequest, HintType, ManualClock, RequestDraft, RequestId,
    RequestState, SequentialIds, StudentId, Timestamp,
};
use hintdesk_pipeline::{
    detect_stage, fulfil, Call, CallLog, CannedExecutor, CompletionProvider, ExecLimits,
    ExecutionResult, ExitStatus, GenerationError, HintPipeline, MockProvider, ProcessSandbox,
    ProviderConfig, ProviderError, RecordingExecutor, Stage,
};
use proptest::prelude::*;

fn request(hint_type: HintType, code: &str, comment: Option<&str>) -> HelpRequest {
    HelpRequest {
        request_id: "req-1".into(),
        student_id: "student-7f3a".into(),
        assignment_id: "a1".into(),
        question_id: "q1".into(),
        hint_type,
        student_comment: comment.map(str::to_owned),
        code_snapshot: code.into(),
        created_at: Timestamp::from_millis(0).unwrap(),
        state: RequestState::Generating,
    }
}

fn ok_run() -> ExecutionResult {
    ExecutionResult {
        stdout: "3\n".into(),
        stderr: String::new(),
        exit_status: ExitStatus::Ok,
        wall_time: Duration::from_millis(40),
    }
}

fn recording_pipeline(
    log: &CallLog,
    executor: impl hintdesk_pipeline::CodeExecutor + 'static,
) -> HintPipeline {
    HintPipeline::new(
        Arc::new(MockProvider::new(0).with_log(log.clone())),
        Arc::new(RecordingExecutor::new(executor, log.clone())),
    )
}

/// Keeps every prompt it is sent.
#[derive(Default)]
struct Capturing(Mutex<Vec<String>>);

#[async_trait]
impl CompletionProvider for Capturing {
    async fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        self.0.lock().unwrap().push(prompt.to_owned());
        Ok(hintdesk_pipeline::mock_complete(prompt, 0))
    }
}

const DEBUG_ORDER: [Call; 3] = [
    Call::Execute,
    Call::Complete(Some(Stage::FixGeneration)),
    Call::Complete(Some(Stage::HintGeneration)),
];

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn debugging_runs_execute_fix_hint_in_order(
        code in ".{0,200}",
        comment in proptest::option::of("[a-z ]{1,40}"),
        task in "[A-Za-z ]{0,80}",
    ) {
        let log = CallLog::new();
        let pipeline = recording_pipeline(&log, CannedExecutor(ok_run()));
        let hint = runtime()
            .block_on(pipeline.generate(&request(HintType::Debugging, &code, comment.as_deref()), &task))
            .unwrap();
        prop_assert_eq!(log.calls(), DEBUG_ORDER.to_vec());
        prop_assert!(hint.text.starts_with("HINT:"));
    }
}

#[tokio::test]
async fn planning_and_optimization_make_one_call_and_no_execution() {
    for (hint_type, stage, tag) in [
        (HintType::Planning, Stage::PlanGeneration, "PLAN:"),
        (
            HintType::Optimization,
            Stage::OptimizationGeneration,
            "OPTIMIZE:",
        ),
    ] {
        let log = CallLog::new();
        let pipeline = recording_pipeline(&log, CannedExecutor(ok_run()));
        let hint = pipeline
            .generate(&request(hint_type, "", None), "Plot the data")
            .await
            .unwrap();
        assert_eq!(log.calls(), vec![Call::Complete(Some(stage))]);
        assert!(hint.text.starts_with(tag));
        assert!(hint.execution.is_none());
    }
}

#[tokio::test]
async fn infinite_loop_still_yields_a_hint() {
    let log = CallLog::new();
    let pipeline =
        recording_pipeline(&log, ProcessSandbox::default()).with_limits(ExecLimits::default());
    let hint = pipeline
        .generate(
            &request(HintType::Debugging, "while True:\n    pass\n", None),
            "Sum a list",
        )
        .await
        .unwrap();
    let run = hint.execution.unwrap();
    assert_eq!(run.exit_status, ExitStatus::Timeout);
    assert_eq!(run.wall_time, Duration::from_secs(5));
    assert_eq!(log.calls(), DEBUG_ORDER.to_vec());
    assert!(hint.text.starts_with("HINT:"));
}

#[tokio::test]
async fn sandbox_failure_falls_back_to_no_output() {
    let provider = Arc::new(Capturing::default());
    let pipeline = HintPipeline::new(
        provider.clone(),
        Arc::new(CannedExecutor(ExecutionResult::sandbox_failure(
            "no interpreter",
            Duration::ZERO,
        ))),
    );
    let hint = pipeline
        .generate(&request(HintType::Debugging, "print(x)", None), "Print x")
        .await
        .unwrap();
    assert!(hint.text.starts_with("HINT:"));
    let prompts = provider.0.lock().unwrap().clone();
    assert_eq!(prompts.len(), 2);
    assert!(prompts[0].contains("Output of running the student program:\n(none)"));
    assert!(!prompts[0].contains("no interpreter"));
}

#[tokio::test]
async fn prompts_carry_context_but_never_the_student() {
    let provider = Arc::new(Capturing::default());
    let pipeline = HintPipeline::new(provider.clone(), Arc::new(CannedExecutor(ok_run())));
    let req = request(HintType::Debugging, "print(sum([1, 2]))", Some("why 3?"));
    pipeline.generate(&req, "Sum the list").await.unwrap();
    let prompts = provider.0.lock().unwrap().clone();
    assert_eq!(detect_stage(&prompts[0]), Some(Stage::FixGeneration));
    assert_eq!(detect_stage(&prompts[1]), Some(Stage::HintGeneration));
    for prompt in &prompts {
        assert!(prompt.contains("Sum the list"));
        assert!(prompt.contains("print(sum([1, 2]))"));
        assert!(prompt.contains("why 3?"));
        assert!(prompt.contains("3\n"));
        assert!(!prompt.contains(req.student_id.as_str()));
    }
    // The hint prompt sees the fix the first stage produced.
    let fix = hintdesk_pipeline::mock_complete(&prompts[0], 0);
    assert!(prompts[1].contains(&fix));
}

#[tokio::test]
async fn one_retry_then_failure() {
    let request = request(HintType::Planning, "", None);
    let recovered = HintPipeline::new(
        Arc::new(MockProvider::new(0).failing(1)),
        Arc::new(CannedExecutor(ok_run())),
    );
    assert!(recovered.generate(&request, "t").await.is_ok());

    let log = CallLog::new();
    let broken = HintPipeline::new(
        Arc::new(MockProvider::new(0).failing(2).with_log(log.clone())),
        Arc::new(CannedExecutor(ok_run())),
    );
    match broken.generate(&request, "t").await {
        Err(GenerationError::Provider {
            stage: Stage::PlanGeneration,
            attempts: 2,
            ..
        }) => {}
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(log.calls().len(), 2);
}

#[tokio::test]
async fn slow_provider_hits_the_budget() {
    let config = ProviderConfig {
        timeout: Duration::from_millis(100),
        ..ProviderConfig::default()
    };
    let pipeline = HintPipeline::new(
        Arc::new(MockProvider::new(0).with_delay(Duration::from_secs(5))),
        Arc::new(CannedExecutor(ok_run())),
    )
    .with_config(config);
    let started = Instant::now();
    let result = pipeline
        .generate(&request(HintType::Optimization, "", None), "t")
        .await;
    assert!(matches!(
        result,
        Err(GenerationError::Provider {
            source: ProviderError::Timeout(_),
            attempts: 1,
            ..
        })
    ));
    assert!(started.elapsed() < Duration::from_secs(1));
}

#[tokio::test]
async fn latency_matches_measured_wall_time() {
    let pipeline = HintPipeline::new(
        Arc::new(MockProvider::new(0).with_delay(Duration::from_millis(150))),
        Arc::new(CannedExecutor(ok_run())),
    );
    let started = Instant::now();
    let hint = pipeline
        .generate(&request(HintType::Debugging, "x = 1", None), "t")
        .await
        .unwrap();
    let outer = started.elapsed();
    assert!(hint.latency >= Duration::from_millis(300));
    assert!(hint.latency <= outer);
    assert!(outer - hint.latency < Duration::from_millis(50));
}

#[tokio::test]
async fn requests_must_be_generating() {
    let mut req = request(HintType::Planning, "", None);
    req.state = RequestState::Created;
    let pipeline = HintPipeline::new(
        Arc::new(MockProvider::new(0)),
        Arc::new(CannedExecutor(ok_run())),
    );
    assert!(matches!(
        pipeline.generate(&req, "t").await,
        Err(GenerationError::NotGenerating(RequestState::Created))
    ));
}

fn desk() -> HelpDesk {
    let clock = Arc::new(ManualClock::new(
        Timestamp::from_millis(1_700_000_000_000).unwrap(),
    ));
    let (desk, _log) =
        HelpDesk::in_memory(DeskConfig::default(), clock, Arc::new(SequentialIds::new()));
    desk
}

fn submit(desk: &HelpDesk, student: &StudentId, hint_type: HintType) -> RequestId {
    desk.record_consent(student).unwrap();
    let draft = RequestDraft {
        assignment_id: "a1".into(),
        question_id: "q1".into(),
        hint_type,
        comment: None,
        code: "print(1)".into(),
    };
    desk.create_help_request(student, draft).unwrap().request_id
}

#[tokio::test]
async fn fulfil_delivers_or_fails_and_refunds() {
    let desk = desk();
    let student = StudentId::from("s1");
    let good = HintPipeline::new(
        Arc::new(MockProvider::new(0)),
        Arc::new(CannedExecutor(ok_run())),
    );
    let id = submit(&desk, &student, HintType::Planning);
    let hint = fulfil(&desk, &good, &id).await.unwrap().unwrap();
    assert!(hint.text.starts_with("PLAN:"));
    assert_eq!(
        desk.read(|s| s.request(&id).unwrap().state),
        RequestState::Delivered
    );
    // Already delivered: nothing to do.
    assert!(fulfil(&desk, &good, &id).await.unwrap().is_none());

    let bad = HintPipeline::new(
        Arc::new(MockProvider::new(0).failing(10)),
        Arc::new(CannedExecutor(ok_run())),
    );
    let id = submit(&desk, &student, HintType::Debugging);
    assert!(fulfil(&desk, &bad, &id).await.unwrap().is_none());
    assert_eq!(
        desk.read(|s| s.request(&id).unwrap().state),
        RequestState::Failed
    );
    assert_eq!(desk.remaining_quota(&student, &"q1".into()).debugging, 3);
}
