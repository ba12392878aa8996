use super::{Backend, ChatRequest, LlmError, ModelResponse};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

pub trait Clock: Send + Sync {
    fn sleep(&self, d: Duration);
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Records requested sleeps without sleeping.
#[derive(Debug, Default)]
pub struct MockClock {
    sleeps: Mutex<Vec<Duration>>,
}

impl MockClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn sleeps(&self) -> Vec<Duration> {
        self.sleeps.lock().unwrap().clone()
    }
}

impl Clock for MockClock {
    fn sleep(&self, d: Duration) {
        self.sleeps.lock().unwrap().push(d);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base: Duration,
    pub factor: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 5, base: Duration::from_secs(1), factor: 2 }
    }
}

impl RetryPolicy {
    /// Wait before attempt `attempt + 1`, for `attempt` starting at 1.
    pub fn delay(&self, attempt: u32) -> Duration {
        self.base * self.factor.saturating_pow(attempt.saturating_sub(1))
    }
}

pub fn complete_with_retry(
    backend: &dyn Backend,
    request: &ChatRequest,
    policy: &RetryPolicy,
    clock: &dyn Clock,
) -> Result<ModelResponse, LlmError> {
    let mut attempt = 1;
    loop {
        match backend.complete(request) {
            Err(e) if e.is_transient() && attempt < policy.max_attempts => {
                log::warn!("attempt {attempt} failed: {e}; retrying");
                clock.sleep(policy.delay(attempt));
                attempt += 1;
            }
            r => return r,
        }
    }
}

/// Runs every request with at most `parallelism` in flight. Results come
/// back in input order; one request failing does not stop the others.
pub fn run_batch(
    backend: &dyn Backend,
    requests: &[ChatRequest],
    parallelism: usize,
    policy: &RetryPolicy,
    clock: &dyn Clock,
) -> Result<Vec<Result<ModelResponse, LlmError>>, LlmError> {
    if parallelism == 0 {
        return Err(LlmError::BadParallelism);
    }
    let slots: Vec<Mutex<Option<Result<ModelResponse, LlmError>>>> = requests.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = parallelism.min(requests.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= requests.len() {
                    break;
                }
                let r = complete_with_retry(backend, &requests[i], policy, clock);
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    Ok(slots.into_iter().map(|m| m.into_inner().unwrap().expect("every slot filled")).collect())
}
