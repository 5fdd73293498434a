use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread;

use karel_core::TaskId;
use karel_llm::client::JournalEntry;
use karel_llm::*;

fn bundle() -> PromptBundle {
    build_prompts(&task_fields(TaskId::Maze), PromptMode::PythonicDsl, &RevisionInput::None).unwrap()
}

fn fixture_dir(n: usize) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    // written in reverse so directory order is not name order
    for i in (0..n).rev() {
        std::fs::write(dir.path().join(format!("resp_{i:03}.txt")), format!("response {i}")).unwrap();
    }
    std::fs::write(dir.path().join("notes.md"), "ignored").unwrap();
    dir
}

#[test]
fn fixture_replay_in_name_order() {
    let dir = fixture_dir(32);
    let cfg = LlmClientConfig::fixtures(dir.path());
    let out = request_programs(&bundle(), 32, &cfg).unwrap();
    assert_eq!(out.len(), 32);
    for (i, text) in out.iter().enumerate() {
        assert_eq!(text, &format!("response {i}"));
    }
}

#[test]
fn zero_count_is_empty() {
    let dir = fixture_dir(1);
    let cfg = LlmClientConfig::fixtures(dir.path());
    assert!(request_programs(&bundle(), 0, &cfg).unwrap().is_empty());
}

#[test]
fn fixtures_run_out() {
    let dir = fixture_dir(3);
    let mut src = ResponseSource::new(&LlmClientConfig::fixtures(dir.path())).unwrap();
    assert_eq!(src.request(&bundle(), 2).unwrap(), vec!["response 0", "response 1"]);
    assert_eq!(src.remaining(), Some(1));
    assert!(matches!(
        src.request(&bundle(), 2),
        Err(LlmError::FixtureExhausted {
            requested: 2,
            available: 1
        })
    ));
}

#[test]
fn responses_are_journaled() {
    let dir = fixture_dir(2);
    let journal = tempfile::tempdir().unwrap();
    let cfg = LlmClientConfig {
        journal_dir: Some(journal.path().to_path_buf()),
        ..LlmClientConfig::fixtures(dir.path())
    };
    request_programs(&bundle(), 2, &cfg).unwrap();
    let entry: JournalEntry =
        serde_json::from_str(&std::fs::read_to_string(journal.path().join("00001.json")).unwrap()).unwrap();
    assert_eq!(entry.response, "response 1");
    assert_eq!(entry.fixture_file.as_deref(), Some("resp_001.txt"));
    assert_eq!(entry.mode, "pythonic_dsl");
    assert_eq!((entry.temperature, entry.top_p), (1.0, 1.0));
    assert!(entry.user.contains("Task name: MAZESPARSE"));
}

#[test]
fn exactly_one_mode() {
    let both = LlmClientConfig {
        endpoint: Some("http://127.0.0.1:1/v1/chat/completions".into()),
        ..LlmClientConfig::fixtures("/tmp")
    };
    assert!(matches!(both.validate(), Err(LlmError::Config(_))));
    assert!(matches!(LlmClientConfig::default().validate(), Err(LlmError::Config(_))));
}

#[test]
fn unreachable_endpoint_fails_after_three_attempts() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    drop(listener);
    let cfg = LlmClientConfig {
        endpoint: Some(format!("http://127.0.0.1:{port}/v1/chat/completions")),
        backoff_ms: 1,
        ..LlmClientConfig::default()
    };
    match request_programs(&bundle(), 1, &cfg) {
        Err(LlmError::Transport { attempts, .. }) => assert_eq!(attempts, 3),
        other => panic!("expected transport error, got {other:?}"),
    }
}

/// Answers each connection with the next canned status and body.
fn serve(replies: Vec<(u16, String)>) -> (String, thread::JoinHandle<Vec<String>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let handle = thread::spawn(move || {
        let mut bodies = Vec::new();
        for (status, body) in replies {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            bodies.push(String::from_utf8(buf).unwrap());
            write!(
                stream,
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
        bodies
    });
    (url, handle)
}

#[test]
fn live_request_retries_then_reads_content() {
    let ok = serde_json::json!({"choices": [{"message": {"role": "assistant", "content": "```\nDEF run m( move m)\n```"}}]});
    let (url, server) = serve(vec![(500, "{}".into()), (200, ok.to_string())]);
    let cfg = LlmClientConfig {
        endpoint: Some(url),
        backoff_ms: 1,
        parallelism: 1,
        ..LlmClientConfig::default()
    };
    let out = request_programs(&bundle(), 1, &cfg).unwrap();
    assert_eq!(out, vec!["```\nDEF run m( move m)\n```"]);
    let bodies = server.join().unwrap();
    let sent: serde_json::Value = serde_json::from_str(&bodies[1]).unwrap();
    assert_eq!(sent["temperature"], 1.0);
    assert_eq!(sent["top_p"], 1.0);
    assert_eq!(sent["messages"][0]["role"], "system");
    assert!(sent["messages"][1]["content"].as_str().unwrap().contains("MAZESPARSE"));
}
