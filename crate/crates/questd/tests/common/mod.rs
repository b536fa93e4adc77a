#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, ExitStatus, Output, Stdio};
use std::time::{Duration, Instant};

use crossbeam_channel::{Receiver, RecvTimeoutError};

pub fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn core_fixture(rel: &str) -> PathBuf {
    workspace().join("crates/core/tests/fixtures").join(rel)
}

/// A `questd` invocation with a clean environment and its own state dir.
pub fn questd(state_dir: &Path) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_questd"));
    c.env_clear()
        .env("PATH", std::env::var_os("PATH").unwrap_or_default())
        .env("HOME", state_dir)
        .arg("--state-dir")
        .arg(state_dir);
    c
}

pub fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("run questd")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub struct Line {
    pub at: Instant,
    pub text: String,
}

fn pump(stream: impl std::io::Read + Send + 'static) -> Receiver<Line> {
    let (tx, rx) = crossbeam_channel::unbounded();
    std::thread::spawn(move || {
        for line in BufReader::new(stream).lines() {
            let Ok(text) = line else { break };
            if tx.send(Line { at: Instant::now(), text }).is_err() {
                break;
            }
        }
    });
    rx
}

/// A running `questd watch` or `questd serve`.
pub struct Daemon {
    child: Child,
    pub stdout: Receiver<Line>,
    pub stderr: Receiver<Line>,
    pub port: Option<u16>,
    pub startup: Vec<String>,
}

impl Daemon {
    /// Starts the daemon and waits until it reports readiness.
    pub fn start(mut cmd: Command) -> Result<Daemon, String> {
        let mut child = cmd
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .stdin(Stdio::null())
            .spawn()
            .map_err(|e| e.to_string())?;
        let stdout = pump(child.stdout.take().unwrap());
        let stderr = pump(child.stderr.take().unwrap());
        let mut d = Daemon { child, stdout, stderr, port: None, startup: Vec::new() };
        let deadline = Instant::now() + Duration::from_secs(30);
        loop {
            match d.stderr.recv_timeout(deadline.saturating_duration_since(Instant::now())) {
                Ok(line) => {
                    if let Some(addr) = line.text.strip_prefix("questd: listening on http://") {
                        d.port = addr.rsplit(':').next().and_then(|p| p.parse().ok());
                    }
                    let ready = line.text == "questd: ready";
                    d.startup.push(line.text);
                    if ready {
                        return Ok(d);
                    }
                }
                Err(RecvTimeoutError::Timeout) => return Err(format!("no readiness line: {:?}", d.startup)),
                Err(RecvTimeoutError::Disconnected) => {
                    let status = d.child.wait().map_err(|e| e.to_string())?;
                    return Err(format!("exited with {status} during startup: {:?}", d.startup));
                }
            }
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://127.0.0.1:{}{path}", self.port.expect("daemon serves the API"))
    }

    pub fn ws_url(&self) -> String {
        format!("ws://127.0.0.1:{}/live", self.port.expect("daemon serves the API"))
    }

    /// Next stdout line matching `pred`, skipping others.
    pub fn expect_stdout(&self, timeout: Duration, pred: impl Fn(&str) -> bool) -> Option<Line> {
        let deadline = Instant::now() + timeout;
        loop {
            let left = deadline.checked_duration_since(Instant::now())?;
            match self.stdout.recv_timeout(left) {
                Ok(line) if pred(&line.text) => return Some(line),
                Ok(_) => {}
                Err(_) => return None,
            }
        }
    }

    /// Collects stdout lines until `quiet` passes without output.
    pub fn drain_stdout(&self, quiet: Duration) -> Vec<String> {
        let mut out = Vec::new();
        while let Ok(l) = self.stdout.recv_timeout(quiet) {
            out.push(l.text);
        }
        out
    }

    pub fn pid(&self) -> u32 {
        self.child.id()
    }

    /// Sends SIGTERM and waits for the process to exit.
    pub fn terminate(mut self) -> ExitStatus {
        let _ = Command::new("kill").args(["-TERM", &self.child.id().to_string()]).status();
        self.wait(Duration::from_secs(20))
    }

    pub fn wait(&mut self, timeout: Duration) -> ExitStatus {
        let deadline = Instant::now() + timeout;
        loop {
            if let Some(s) = self.child.try_wait().expect("wait") {
                return s;
            }
            if Instant::now() > deadline {
                let _ = self.child.kill();
                return self.child.wait().expect("wait");
            }
            std::thread::sleep(Duration::from_millis(20));
        }
    }
}

impl Drop for Daemon {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub fn http() -> reqwest::blocking::Client {
    reqwest::blocking::Client::builder().timeout(Duration::from_secs(10)).build().unwrap()
}

pub fn write(path: &Path, text: &str) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, text).unwrap();
}

pub fn java_test_class(methods: &[&str]) -> String {
    let mut out = String::from("package com.shop;\n\nimport org.junit.jupiter.api.Test;\n\nclass CartTest {\n");
    for m in methods {
        out.push_str(&format!("    @Test\n    void {m}() {{\n        new Cart().add(\"{m}\");\n    }}\n\n"));
    }
    out.push_str("}\n");
    out
}

pub fn java_cart(extra: &str) -> String {
    format!("package com.shop;\n\nclass Cart {{\n    void add(String item) {{\n        items.add(item);\n{extra}    }}\n}}\n")
}

pub fn junit_report(cases: &[(&str, bool)]) -> String {
    let failures = cases.iter().filter(|c| !c.1).count();
    let mut out = format!(
        "<?xml version=\"1.0\"?>\n<testsuite name=\"com.shop.CartTest\" tests=\"{}\" failures=\"{failures}\">\n",
        cases.len()
    );
    for (name, passed) in cases {
        if *passed {
            out.push_str(&format!("  <testcase name=\"{name}\" classname=\"com.shop.CartTest\"/>\n"));
        } else {
            out.push_str(&format!(
                "  <testcase name=\"{name}\" classname=\"com.shop.CartTest\">\n    \
                 <failure type=\"java.lang.AssertionError\">expected 3 but was 2</failure>\n  </testcase>\n"
            ));
        }
    }
    out.push_str("</testsuite>\n");
    out
}

/// A project with one production class and one test class.
pub fn sample_project(root: &Path) {
    write(&root.join("src/main/java/com/shop/Cart.java"), &java_cart(""));
    write(&root.join("src/test/java/com/shop/CartTest.java"), &java_test_class(&["addsItem", "removesItem", "total"]));
    std::fs::create_dir_all(root.join("build/test-results/test")).unwrap();
    std::fs::create_dir_all(root.join("build/reports/jacoco")).unwrap();
}

/// `questd watch` with short debounce and pairing windows and no idle timer.
pub fn watch_cmd(state: &Path, root: &Path) -> Command {
    let mut c = questd(state);
    c.env("QUESTD_DEBOUNCE_MS", "50")
        .env("QUESTD_COVERAGE_PAIR_WINDOW_MS", "150")
        .env("QUESTD_TICK_SECONDS", "0")
        .args(["watch", "--port", "0"])
        .arg(root);
    c
}

type Action<'a> = Box<dyn Fn() + 'a>;

pub struct Step {
    pub name: &'static str,
    /// From the file write to the first notification line.
    pub latency: Option<Duration>,
    pub lines: Vec<String>,
}

/// Edits a sample project under a running watcher and records what it printed.
pub fn scripted_watch_session(d: &Daemon, root: &Path) -> Vec<Step> {
    let report = root.join("build/test-results/test/TEST-com.shop.CartTest.xml");
    let all = ["addsItem", "removesItem", "total", "emptyCart", "twoItems", "discount"];
    let actions: Vec<(&'static str, Action)> = vec![
        (
            "production edit",
            Box::new(|| {
                write(
                    &root.join("src/main/java/com/shop/Cart.java"),
                    &java_cart("        System.out.println(\"added \" + item);\n"),
                )
            }),
        ),
        (
            "failing report",
            Box::new(|| write(&report, &junit_report(&[("addsItem", true), ("removesItem", true), ("total", false)]))),
        ),
        ("test edit", Box::new(|| write(&root.join("src/test/java/com/shop/CartTest.java"), &java_test_class(&all)))),
        (
            "passing report",
            Box::new(|| write(&report, &junit_report(&all.iter().map(|m| (*m, true)).collect::<Vec<_>>()))),
        ),
        (
            "coverage report",
            Box::new(|| {
                let xml = std::fs::read_to_string(core_fixture("jacoco/two_classes.xml")).unwrap();
                write(&root.join("build/reports/jacoco/jacocoTestReport.xml"), &xml)
            }),
        ),
    ];
    let mut steps = Vec::new();
    for (name, act) in actions {
        let t0 = Instant::now();
        act();
        let first = d.expect_stdout(Duration::from_secs(5), |_| true);
        let latency = first.as_ref().map(|l| l.at.saturating_duration_since(t0));
        let mut lines: Vec<String> = first.into_iter().map(|l| l.text).collect();
        lines.extend(d.drain_stdout(Duration::from_millis(400)));
        steps.push(Step { name, latency, lines });
    }
    steps
}
