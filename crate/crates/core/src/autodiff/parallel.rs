use super::{Real, Tensor};

/// Splits `items` into `workers` contiguous chunks, evaluates `f` on each
/// (in parallel when `workers > 1`), and sums the returned loss components
/// and gradient lists elementwise in chunk order. The result depends only on the inputs
/// and the worker count.
pub fn partitioned_sum<I, T, F, E>(workers: usize, items: &[I], f: F) -> Result<(Vec<f64>, Vec<Tensor<T>>), E>
where
    I: Sync,
    T: Real,
    E: Send,
    F: Fn(&[I]) -> Result<(Vec<f64>, Vec<Tensor<T>>), E> + Sync,
{
    let workers = workers.clamp(1, items.len().max(1));
    let chunk = items.len().div_ceil(workers).max(1);
    let chunks: Vec<&[I]> = items.chunks(chunk).collect();
    let results: Vec<Result<(Vec<f64>, Vec<Tensor<T>>), E>> = if chunks.len() <= 1 {
        chunks.iter().map(|c| f(c)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(chunks.len())
            .build()
            .expect("thread pool");
        pool.install(|| {
            use rayon::prelude::*;
            chunks.par_iter().map(|c| f(c)).collect()
        })
    };
    let mut loss: Vec<f64> = Vec::new();
    let mut total: Option<Vec<Tensor<T>>> = None;
    for r in results {
        let (l, grads) = r?;
        if loss.is_empty() {
            loss = l;
        } else {
            for (a, b) in loss.iter_mut().zip(l) {
                *a += b;
            }
        }
        match &mut total {
            None => total = Some(grads),
            Some(acc) => {
                for (a, g) in acc.iter_mut().zip(grads) {
                    for (x, y) in a.data.iter_mut().zip(g.data) {
                        *x += y;
                    }
                }
            }
        }
    }
    Ok((loss, total.unwrap_or_default()))
}
