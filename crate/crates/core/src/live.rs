//! Live runtime: the router driven by wall-clock threads.
//!
//! A client thread replays the trace in real time, one thread per worker
//! sleeps for each batch's latency, and a single dispatcher (the calling
//! thread) owns the router. All communication goes through channels.

use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::thread;
use std::time::{Duration, Instant};

use crate::error::Result;
use crate::metrics::SimReport;
use crate::policy::Policy;
use crate::profile::build_buckets;
use crate::router::{Assignment, Router};
use crate::sim::{router_settings, SimConfig};
use crate::tracegen::{Query, Trace};
use crate::Micros;

/// A run is invalid when more than 1% of arrivals reach the router later
/// than this. A single late wakeup is scheduler jitter, not a client that
/// cannot keep up, so the maximum is reported but not judged.
pub const DEFAULT_MAX_PACING_LAG_US: Micros = 10_000;

#[derive(Clone, Copy, Debug)]
pub struct ServeOptions {
    pub max_pacing_lag_us: Micros,
}

impl Default for ServeOptions {
    fn default() -> Self {
        ServeOptions {
            max_pacing_lag_us: DEFAULT_MAX_PACING_LAG_US,
        }
    }
}

enum Msg {
    Arrive(Query),
    Done { batch: usize, end_us: Micros },
    ClientDone { lags_us: Vec<Micros> },
}

struct Clock(Instant);

impl Clock {
    fn now_us(&self) -> Micros {
        self.0.elapsed().as_micros() as Micros
    }

    fn sleep_until(&self, t_us: Micros) {
        let target = self.0 + Duration::from_micros(t_us);
        let now = Instant::now();
        if target > now {
            thread::sleep(target - now);
        }
    }
}

/// Serves the trace in real time with default options.
pub fn serve(trace: &Trace, config: &SimConfig) -> Result<SimReport> {
    serve_with(trace, config, ServeOptions::default())
}

pub fn serve_with(trace: &Trace, config: &SimConfig, options: ServeOptions) -> Result<SimReport> {
    config.validate()?;
    let catalog = &config.catalog;
    let buckets = build_buckets(catalog, config.bucket_count)?;
    let policy = Policy::new(config.policy.clone(), catalog)?;
    let settings = router_settings(trace, config, true);
    let mut router = Router::new(catalog, &buckets, &policy, settings, trace.len());

    let mut echo = config.echo(trace);
    echo["mode"] = "serve".into();
    echo["max_pacing_lag_us"] = options.max_pacing_lag_us.into();

    let clock = std::sync::Arc::new(Clock(Instant::now()));
    let (tx, rx) = mpsc::channel::<Msg>();

    let client = {
        let tx = tx.clone();
        let clock = clock.clone();
        let queries = trace.queries.clone();
        thread::spawn(move || {
            let mut lags = Vec::with_capacity(queries.len());
            for q in queries {
                clock.sleep_until(q.arrival_us);
                lags.push(clock.now_us().saturating_sub(q.arrival_us));
                if tx.send(Msg::Arrive(q)).is_err() {
                    return;
                }
            }
            let _ = tx.send(Msg::ClientDone { lags_us: lags });
        })
    };

    let mut worker_tx: Vec<Option<Sender<Assignment>>> = Vec::new();
    let mut handles = Vec::new();
    for _ in 0..config.workers {
        let (wtx, wrx): (Sender<Assignment>, Receiver<Assignment>) = mpsc::channel();
        let tx = tx.clone();
        let clock = clock.clone();
        handles.push(thread::spawn(move || {
            for a in wrx {
                clock.sleep_until(a.start_us + a.duration_us);
                let end_us = clock.now_us();
                if tx
                    .send(Msg::Done {
                        batch: a.batch_index,
                        end_us,
                    })
                    .is_err()
                {
                    return;
                }
            }
        }));
        worker_tx.push(Some(wtx));
    }
    drop(tx);

    let mut faults = config.faults.clone();
    faults.sort();
    let mut next_fault = 0;
    let mut in_flight = 0usize;
    let mut client_done = false;
    let mut lags = Vec::new();
    let mut now = 0;

    loop {
        if client_done && in_flight == 0 && (router.queue_len() == 0 || router.alive_workers() == 0)
        {
            break;
        }
        let msg = match faults.get(next_fault) {
            Some(f) => {
                let wait = f.at_us.saturating_sub(clock.now_us());
                match rx.recv_timeout(Duration::from_micros(wait)) {
                    Ok(m) => Some(m),
                    Err(RecvTimeoutError::Timeout) => None,
                    Err(RecvTimeoutError::Disconnected) => break,
                }
            }
            None => match rx.recv() {
                Ok(m) => Some(m),
                Err(_) => break,
            },
        };
        now = now.max(clock.now_us());
        router.advance_clock(now);
        while let Some(f) = faults.get(next_fault) {
            if f.at_us > now {
                break;
            }
            router.kill(f.worker);
            if !router.workers()[f.worker].alive {
                worker_tx[f.worker] = None;
            }
            next_fault += 1;
        }
        match msg {
            Some(Msg::Arrive(q)) => router.arrive(q),
            Some(Msg::Done { batch, end_us }) => {
                in_flight -= 1;
                let worker = router.batch_worker(batch);
                router.complete(batch, end_us);
                if !router.workers()[worker].alive {
                    worker_tx[worker] = None;
                }
            }
            Some(Msg::ClientDone { lags_us }) => {
                client_done = true;
                lags = lags_us;
            }
            None => {}
        }
        for a in router.schedule(now) {
            in_flight += 1;
            let w = a.worker;
            worker_tx[w]
                .as_ref()
                .expect("dispatch only to alive workers")
                .send(a)
                .expect("worker thread alive");
        }
    }

    drop(worker_tx);
    let _ = client.join();
    for h in handles {
        let _ = h.join();
    }
    let mut report = router.finish(now.max(trace.duration_us), echo);
    lags.sort_unstable();
    let p99 = lags.get(lags.len() * 99 / 100).copied().unwrap_or(0);
    report.summary.max_pacing_lag_us = lags.last().copied().unwrap_or(0);
    report.summary.p99_pacing_lag_us = p99;
    report.summary.valid = p99 <= options.max_pacing_lag_us;
    Ok(report)
}
