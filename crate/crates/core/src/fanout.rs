//! Bounded parallel map with index-ordered results.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

/// Applies `f` to every item using at most `limit` worker threads.
///
/// Results are placed by index, so the output does not depend on completion
/// order. On failure the error of the lowest failing index is returned.
pub fn map_bounded<T, R, E, F>(items: &[T], limit: usize, f: F) -> Result<Vec<R>, E>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(usize, &T) -> Result<R, E> + Sync,
{
    let workers = limit.max(1).min(items.len());
    if workers <= 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }

    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let slots: Vec<Mutex<Option<Result<R, E>>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let out = f(i, &items[i]);
                if out.is_err() {
                    stop.store(true, Ordering::SeqCst);
                }
                *slots[i].lock().unwrap() = Some(out);
            });
        }
    });

    // Indices are claimed in increasing order, so every index below a failure
    // has been evaluated and the first error found here is the lowest one.
    let mut out = Vec::with_capacity(items.len());
    for slot in slots {
        match slot.into_inner().unwrap() {
            Some(Ok(r)) => out.push(r),
            Some(Err(e)) => return Err(e),
            None => unreachable!("unclaimed index below the first failure"),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order_across_limits() {
        let items: Vec<u64> = (0..100).collect();
        for limit in [0, 1, 3, 8, 200] {
            let out: Result<Vec<u64>, ()> = map_bounded(&items, limit, |i, x| Ok(x * 2 + i as u64));
            assert_eq!(out.unwrap(), items.iter().map(|x| x * 3).collect::<Vec<_>>());
        }
    }

    #[test]
    fn returns_lowest_index_error() {
        let items: Vec<usize> = (0..50).collect();
        for limit in [1, 8] {
            let out: Result<Vec<usize>, usize> =
                map_bounded(&items, limit, |_, &x| if x % 7 == 5 { Err(x) } else { Ok(x) });
            assert_eq!(out, Err(5));
        }
    }

    #[test]
    fn empty_input() {
        let out: Result<Vec<()>, ()> = map_bounded(&[] as &[u8], 4, |_, _| Ok(()));
        assert!(out.unwrap().is_empty());
    }
}
