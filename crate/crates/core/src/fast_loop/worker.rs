//! Background slow-loop thread for concurrent scheduling.

use std::sync::mpsc::{channel, Receiver, Sender, TryRecvError};
use std::sync::Arc;
use std::thread;

use crate::context::TaskContext;
use crate::exec::Exec;
use crate::labeling::FunctionVotes;
use crate::slow_loop::{Publication, SlowLoop, SlowSnapshot};

struct Job {
    snapshot: SlowSnapshot,
    previous: Vec<FunctionVotes>,
}

pub(super) struct Worker {
    jobs: Sender<Job>,
    results: Receiver<Publication>,
    busy: bool,
}

impl Worker {
    pub(super) fn spawn(ctx: Arc<TaskContext>, mut slow: SlowLoop) -> Self {
        let (jobs, job_rx) = channel::<Job>();
        let (result_tx, results) = channel();
        thread::Builder::new()
            .name("slow-loop".into())
            .spawn(move || {
                lower_priority();
                while let Ok(job) = job_rx.recv() {
                    let publication = slow.iterate(&ctx, &job.snapshot, &job.previous, Exec::Sequential);
                    if result_tx.send(publication).is_err() {
                        break;
                    }
                }
            })
            .expect("spawn slow-loop thread");
        Worker { jobs, results, busy: false }
    }

    pub(super) fn is_busy(&self) -> bool {
        self.busy
    }

    pub(super) fn submit(&mut self, snapshot: SlowSnapshot, previous: Vec<FunctionVotes>) {
        if self.jobs.send(Job { snapshot, previous }).is_ok() {
            self.busy = true;
        }
    }

    /// A finished publication, if one is ready.
    pub(super) fn poll(&mut self) -> Option<Publication> {
        match self.results.try_recv() {
            Ok(p) => {
                self.busy = false;
                Some(p)
            }
            Err(TryRecvError::Empty) => None,
            Err(TryRecvError::Disconnected) => {
                self.busy = false;
                None
            }
        }
    }

    /// Blocks until the in-flight iteration, if any, publishes.
    pub(super) fn wait(&mut self) -> Option<Publication> {
        if !self.busy {
            return None;
        }
        self.busy = false;
        self.results.recv().ok()
    }
}

/// Keeps the fast loop ahead of the background thread on a loaded machine.
#[cfg(target_os = "linux")]
fn lower_priority() {
    // SAFETY: plain syscalls on the calling thread's own id.
    unsafe {
        let tid = libc::syscall(libc::SYS_gettid) as libc::pid_t;
        // SCHED_IDLE yields to every runnable normal thread; nice 19 is the
        // fallback where the policy change is refused.
        let param = libc::sched_param { sched_priority: 0 };
        if libc::sched_setscheduler(tid, libc::SCHED_IDLE, &param) != 0 {
            libc::setpriority(libc::PRIO_PROCESS, tid as libc::id_t, 19);
        }
    }
}

#[cfg(not(target_os = "linux"))]
fn lower_priority() {}
