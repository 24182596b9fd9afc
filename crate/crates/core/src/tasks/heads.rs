use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::glorot_bound;

/// Which task a head (and a trained model) serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Sentiment,
    Match,
    Mrc,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Sentiment => "sentiment",
            Task::Match => "match",
            Task::Mrc => "mrc",
        }
    }
}

impl std::str::FromStr for Task {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "sentiment" => Ok(Task::Sentiment),
            "match" => Ok(Task::Match),
            "mrc" => Ok(Task::Mrc),
            other => Err(crate::Error::config(format!("unknown task {other:?}"))),
        }
    }
}

/// Two-way logits over {negative, positive} from the `[CLS]` vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SentimentHead {
    /// `d_model × 2`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Single key-entity logit from the `[CLS]` vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchHead {
    pub weight: Array1<f64>,
    /// length 1
    pub bias: Array1<f64>,
}

/// Per-token start and end scores.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanHead {
    pub start_weight: Array1<f64>,
    pub start_bias: Array1<f64>,
    pub end_weight: Array1<f64>,
    pub end_bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Head {
    Sentiment(SentimentHead),
    Match(MatchHead),
    Span(SpanHead),
}

fn uniform<R: Rng + ?Sized>(n: usize, bound: f64, rng: &mut R) -> Array1<f64> {
    Array1::from_shape_simple_fn(n, || rng.gen_range(-bound..=bound))
}

impl Head {
    pub fn zeros(task: Task, d_model: usize) -> Self {
        match task {
            Task::Sentiment => Head::Sentiment(SentimentHead {
                weight: Array2::zeros((d_model, 2)),
                bias: Array1::zeros(2),
            }),
            Task::Match => Head::Match(MatchHead {
                weight: Array1::zeros(d_model),
                bias: Array1::zeros(1),
            }),
            Task::Mrc => Head::Span(SpanHead {
                start_weight: Array1::zeros(d_model),
                start_bias: Array1::zeros(1),
                end_weight: Array1::zeros(d_model),
                end_bias: Array1::zeros(1),
            }),
        }
    }

    /// Glorot-uniform weights and zero biases.
    pub fn init<R: Rng + ?Sized>(task: Task, d_model: usize, rng: &mut R) -> Self {
        match task {
            Task::Sentiment => {
                let b = glorot_bound(d_model, 2);
                Head::Sentiment(SentimentHead {
                    weight: Array2::from_shape_simple_fn((d_model, 2), || rng.gen_range(-b..=b)),
                    bias: Array1::zeros(2),
                })
            }
            Task::Match => Head::Match(MatchHead {
                weight: uniform(d_model, glorot_bound(d_model, 1), rng),
                bias: Array1::zeros(1),
            }),
            Task::Mrc => {
                let b = glorot_bound(d_model, 1);
                Head::Span(SpanHead {
                    start_weight: uniform(d_model, b, rng),
                    start_bias: Array1::zeros(1),
                    end_weight: uniform(d_model, b, rng),
                    end_bias: Array1::zeros(1),
                })
            }
        }
    }

    pub fn task(&self) -> Task {
        match self {
            Head::Sentiment(_) => Task::Sentiment,
            Head::Match(_) => Task::Match,
            Head::Span(_) => Task::Mrc,
        }
    }

    pub fn zeros_like(&self) -> Self {
        let d = match self {
            Head::Sentiment(h) => h.weight.nrows(),
            Head::Match(h) => h.weight.len(),
            Head::Span(h) => h.start_weight.len(),
        };
        Head::zeros(self.task(), d)
    }

    pub fn named_tensors(&self) -> Vec<(&'static str, [usize; 2], &[f64])> {
        fn v(a: &Array1<f64>) -> ([usize; 2], &[f64]) {
            ([1, a.len()], a.as_slice().expect("contiguous"))
        }
        let mut out = Vec::new();
        match self {
            Head::Sentiment(h) => {
                out.push((
                    "sentiment.weight",
                    [h.weight.nrows(), h.weight.ncols()],
                    h.weight.as_slice().expect("contiguous"),
                ));
                let (s, d) = v(&h.bias);
                out.push(("sentiment.bias", s, d));
            }
            Head::Match(h) => {
                for (name, a) in [("match.weight", &h.weight), ("match.bias", &h.bias)] {
                    let (s, d) = v(a);
                    out.push((name, s, d));
                }
            }
            Head::Span(h) => {
                for (name, a) in [
                    ("span.start_weight", &h.start_weight),
                    ("span.start_bias", &h.start_bias),
                    ("span.end_weight", &h.end_weight),
                    ("span.end_bias", &h.end_bias),
                ] {
                    let (s, d) = v(a);
                    out.push((name, s, d));
                }
            }
        }
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Head::Sentiment(h) => vec![
                h.weight.as_slice_mut().expect("contiguous"),
                h.bias.as_slice_mut().expect("contiguous"),
            ],
            Head::Match(h) => vec![
                h.weight.as_slice_mut().expect("contiguous"),
                h.bias.as_slice_mut().expect("contiguous"),
            ],
            Head::Span(h) => vec![
                h.start_weight.as_slice_mut().expect("contiguous"),
                h.start_bias.as_slice_mut().expect("contiguous"),
                h.end_weight.as_slice_mut().expect("contiguous"),
                h.end_bias.as_slice_mut().expect("contiguous"),
            ],
        }
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        self.named_tensors().into_iter().map(|(_, _, d)| d).collect()
    }
}

impl SentimentHead {
    pub fn logits(&self, cls: ArrayView1<f64>) -> [f64; 2] {
        let z = cls.dot(&self.weight) + &self.bias;
        [z[0], z[1]]
    }

    /// Accumulates parameter gradients into `grad` and returns d(cls).
    pub fn backward(&self, cls: ArrayView1<f64>, d_logits: &[f64], grad: &mut SentimentHead) -> Array1<f64> {
        let dz = ArrayView1::from(d_logits);
        for (i, &c) in cls.iter().enumerate() {
            grad.weight[[i, 0]] += c * dz[0];
            grad.weight[[i, 1]] += c * dz[1];
        }
        grad.bias += &dz;
        self.weight.dot(&dz)
    }
}

impl MatchHead {
    pub fn logit(&self, cls: ArrayView1<f64>) -> f64 {
        cls.dot(&self.weight) + self.bias[0]
    }

    pub fn backward(&self, cls: ArrayView1<f64>, d_logit: f64, grad: &mut MatchHead) -> Array1<f64> {
        grad.weight.scaled_add(d_logit, &cls);
        grad.bias[0] += d_logit;
        &self.weight * d_logit
    }
}

impl SpanHead {
    /// Start and end scores for every position of `tokens` (`len × d_model`).
    pub fn scores(&self, tokens: ArrayView2<f64>) -> (Array1<f64>, Array1<f64>) {
        let start = tokens.dot(&self.start_weight) + self.start_bias[0];
        let end = tokens.dot(&self.end_weight) + self.end_bias[0];
        (start, end)
    }

    /// Accumulates parameter gradients and returns d(tokens).
    pub fn backward(
        &self,
        tokens: ArrayView2<f64>,
        d_start: &Array1<f64>,
        d_end: &Array1<f64>,
        grad: &mut SpanHead,
    ) -> Array2<f64> {
        grad.start_weight += &tokens.t().dot(d_start);
        grad.start_bias[0] += d_start.sum();
        grad.end_weight += &tokens.t().dot(d_end);
        grad.end_bias[0] += d_end.sum();
        let ds = d_start.view().insert_axis(ndarray::Axis(1));
        let de = d_end.view().insert_axis(ndarray::Axis(1));
        let sw = self.start_weight.view().insert_axis(ndarray::Axis(0));
        let ew = self.end_weight.view().insert_axis(ndarray::Axis(0));
        ds.dot(&sw) + de.dot(&ew)
    }
}
