use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

/// Stops the shared token when the caller cancels or the deadline passes.
pub(crate) struct Watch {
    pub(crate) stop: Arc<AtomicBool>,
    pub(crate) done: Arc<AtomicBool>,
}

impl Watch {
    pub(crate) fn spawn<'s>(
        scope: &'s std::thread::Scope<'s, '_>,
        user: Option<Arc<AtomicBool>>,
        deadline: Option<Instant>,
        stop: Arc<AtomicBool>,
    ) -> Watch {
        let done = Arc::new(AtomicBool::new(false));
        if user.is_some() || deadline.is_some() {
            let (stop, done) = (stop.clone(), done.clone());
            scope.spawn(move || {
                while !done.load(Ordering::Relaxed) {
                    let cancelled = user.as_ref().is_some_and(|c| c.load(Ordering::Relaxed));
                    if cancelled || deadline.is_some_and(|d| Instant::now() >= d) {
                        stop.store(true, Ordering::Relaxed);
                        return;
                    }
                    std::thread::sleep(Duration::from_millis(5));
                }
            });
        }
        Watch { stop, done }
    }
}

impl Drop for Watch {
    fn drop(&mut self) {
        self.done.store(true, Ordering::Relaxed);
    }
}
