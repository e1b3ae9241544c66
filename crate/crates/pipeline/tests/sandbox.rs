use std::net::TcpListener;
use std::process::Command;
use std::time::{Duration, Instant};

use hintdesk_pipeline::{CodeExecutor, ExecLimits, ExitStatus, ProcessSandbox};

fn limits(secs: u64) -> ExecLimits {
    ExecLimits {
        wall_time: Duration::from_secs(secs),
        ..ExecLimits::default()
    }
}

#[tokio::test]
async fn printing_program_succeeds() {
    let result = ProcessSandbox::default()
        .execute("print(7)", &limits(5))
        .await;
    assert_eq!(result.exit_status, ExitStatus::Ok, "{result:?}");
    assert_eq!(result.stdout.trim(), "7");
    assert!(result.stderr.is_empty());
}

#[tokio::test]
async fn uncaught_exception_matches_a_direct_run() {
    let code = "values = [1, 2, 3]\nprint(values[1] / (values[0] - 1))\n";
    // Oracle: the same program run directly by the interpreter.
    let direct = Command::new("python3")
        .arg("-c")
        .arg(code)
        .output()
        .unwrap();
    let expected = String::from_utf8(direct.stderr).unwrap();
    let expected_last = expected.lines().last().unwrap();
    assert!(!direct.status.success());

    let result = ProcessSandbox::default().execute(code, &limits(5)).await;
    assert_eq!(result.exit_status, ExitStatus::Error);
    assert!(result.stderr.contains("Traceback (most recent call last)"));
    assert_eq!(result.stderr.lines().last().unwrap(), expected_last);
}

#[tokio::test]
async fn infinite_loop_times_out_at_the_limit() {
    let limit = limits(1);
    let started = Instant::now();
    let result = ProcessSandbox::default()
        .execute("while True:\n    pass\n", &limit)
        .await;
    let elapsed = started.elapsed();
    assert_eq!(result.exit_status, ExitStatus::Timeout);
    assert_eq!(result.wall_time, limit.wall_time);
    assert!(elapsed >= limit.wall_time);
    assert!(
        elapsed < limit.wall_time + Duration::from_secs(1),
        "took {elapsed:?}"
    );
}

#[tokio::test]
async fn adversarial_programs_stay_within_the_grace_margin() {
    let programs = [
        // Background child that would outlive the parent.
        "import subprocess\nsubprocess.Popen(['sleep', '60'])\nwhile True:\n    pass\n",
        // Endless output.
        "while True:\n    print('x' * 1000)\n",
        // Ignores SIGTERM.
        "import signal\nsignal.signal(signal.SIGTERM, signal.SIG_IGN)\nwhile True:\n    pass\n",
        // Sleeps instead of spinning, so CPU limits do not help.
        "import time\ntime.sleep(60)\n",
    ];
    let limit = limits(1);
    for code in programs {
        let started = Instant::now();
        let result = ProcessSandbox::default().execute(code, &limit).await;
        let elapsed = started.elapsed();
        assert_eq!(result.exit_status, ExitStatus::Timeout, "{code}");
        assert!(result.wall_time <= limit.wall_time);
        assert!(
            elapsed < limit.wall_time + Duration::from_secs(1),
            "{code} took {elapsed:?}"
        );
        assert!(result.stdout.len() <= limit.output_bytes);
    }
}

#[tokio::test]
async fn memory_is_capped() {
    let code = "block = bytearray(1024 * 1024 * 1024)\nprint('allocated')\n";
    let result = ProcessSandbox::default().execute(code, &limits(5)).await;
    assert_eq!(result.exit_status, ExitStatus::Error);
    assert!(result.stderr.contains("MemoryError"), "{}", result.stderr);
    assert!(!result.stdout.contains("allocated"));
}

#[tokio::test]
async fn network_is_unreachable() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    let code = format!(
        "import socket\nsocket.create_connection(('127.0.0.1', {port}), timeout=2).sendall(b'leak')\nprint('connected')\n"
    );
    let result = ProcessSandbox::default().execute(&code, &limits(5)).await;
    assert_eq!(result.exit_status, ExitStatus::Error, "{result:?}");
    assert!(!result.stdout.contains("connected"));

    // Sanity check that the same connection works outside the sandbox.
    std::net::TcpStream::connect(("127.0.0.1", port)).unwrap();
}

#[tokio::test]
async fn environment_is_cleared() {
    let code = "import os\nprint(sorted(k for k in os.environ if not k.startswith('LC_')))\n";
    let result = ProcessSandbox::default().execute(code, &limits(5)).await;
    assert_eq!(
        result.stdout.trim(),
        "['HOME', 'PATH', 'PYTHONDONTWRITEBYTECODE']"
    );
}

#[tokio::test]
async fn output_is_truncated_to_the_cap() {
    let limit = ExecLimits {
        output_bytes: 100,
        ..limits(5)
    };
    let result = ProcessSandbox::default()
        .execute("print('y' * 10000)", &limit)
        .await;
    assert_eq!(result.exit_status, ExitStatus::Ok);
    assert_eq!(result.stdout.len(), 100);
}

#[tokio::test]
async fn missing_interpreter_is_a_sandbox_failure() {
    let sandbox = ProcessSandbox::new(vec!["/nonexistent/python".into()]);
    let result = sandbox.execute("print(1)", &limits(5)).await;
    assert_eq!(result.exit_status, ExitStatus::SandboxFailure);
    assert!(!result.stderr.is_empty());
}
