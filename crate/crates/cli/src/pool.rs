use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use aftnet::Result;

/// Applies `f` to every item on up to `threads` workers and returns the
/// results in input order, or the first error by index.
pub fn map<I: Sync, O: Send>(items: &[I], threads: usize, f: impl Fn(&I) -> Result<O> + Sync) -> Result<Vec<O>> {
    if threads <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<O>>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads.min(items.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_kept() {
        let v: Vec<usize> = (0..50).collect();
        let out = map(&v, 4, |x| Ok(x * 2)).unwrap();
        assert_eq!(out, (0..50).map(|x| x * 2).collect::<Vec<_>>());
    }

    #[test]
    fn first_error_by_index() {
        let v: Vec<usize> = (0..20).collect();
        let r = map(&v, 3, |&x| if x % 7 == 6 { Err(aftnet::Error::Usage(x.to_string())) } else { Ok(x) });
        assert!(matches!(r, Err(aftnet::Error::Usage(s)) if s == "6"));
    }
}
