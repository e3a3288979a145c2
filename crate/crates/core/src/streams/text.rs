//! Line-delimited request files.
//!
//! One request per line, whitespace separated:
//!
//! ```text
//! linear <simplex|subsimplex|binary> m d r_1 .. r_d c_11 .. c_1d .. c_md
//! auction v d_comp
//! matching m lambda r_1 .. r_m
//! assortment m <cap|-> r_1 .. r_m theta_1 .. theta_m
//! ```
//!
//! Numbers use Rust's shortest round-trip formatting, so a write/parse cycle
//! reproduces every value exactly. Blank lines and `#` comments are skipped.

use std::fmt::Write as _;

use super::StreamError;
use crate::model::{
    AssortmentRequest, AuctionRequest, ConsumptionMatrix, LinearDomain, LinearRequest,
    MatchingRequest, Request,
};

fn push_all(out: &mut String, xs: &[f64]) {
    for x in xs {
        let _ = write!(out, " {x}");
    }
}

pub fn write_requests(requests: &[Request]) -> String {
    let mut out = String::new();
    for req in requests {
        match req {
            Request::Linear(r) => {
                let c = &r.consumption;
                let _ = write!(out, "linear {} {} {}", r.domain.tag(), c.rows(), c.cols());
                push_all(&mut out, &r.reward);
                push_all(&mut out, c.data());
            }
            Request::Auction(a) => {
                let _ = write!(out, "auction {} {}", a.value, a.competing_bid);
            }
            Request::Matching(r) => {
                let _ = write!(out, "matching {} {}", r.reward.len(), r.lambda);
                push_all(&mut out, &r.reward);
            }
            Request::Assortment(r) => {
                let cap = r.max_size.map_or_else(|| "-".to_string(), |k| k.to_string());
                let _ = write!(out, "assortment {} {cap}", r.revenue.len());
                push_all(&mut out, &r.revenue);
                push_all(&mut out, &r.utility);
            }
        }
        out.push('\n');
    }
    out
}

struct Fields<'a> {
    it: std::str::SplitWhitespace<'a>,
    line: usize,
}

impl<'a> Fields<'a> {
    fn err(&self, message: impl Into<String>) -> StreamError {
        StreamError::Parse {
            line: self.line,
            message: message.into(),
        }
    }

    fn word(&mut self) -> Result<&'a str, StreamError> {
        let line = self.line;
        self.it.next().ok_or(StreamError::Parse {
            line,
            message: "unexpected end of line".into(),
        })
    }

    fn usize(&mut self) -> Result<usize, StreamError> {
        let w = self.word()?;
        w.parse().map_err(|_| self.err(format!("bad integer {w:?}")))
    }

    fn f64(&mut self) -> Result<f64, StreamError> {
        let w = self.word()?;
        w.parse().map_err(|_| self.err(format!("bad number {w:?}")))
    }

    fn vec(&mut self, n: usize) -> Result<Vec<f64>, StreamError> {
        (0..n).map(|_| self.f64()).collect()
    }

    fn finish(mut self) -> Result<(), StreamError> {
        match self.it.next() {
            None => Ok(()),
            Some(w) => Err(self.err(format!("trailing field {w:?}"))),
        }
    }
}

pub fn parse_requests(text: &str) -> Result<Vec<Request>, StreamError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let body = raw.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let mut f = Fields {
            it: body.split_whitespace(),
            line: i + 1,
        };
        let req = match f.word()? {
            "linear" => {
                let tag = f.word()?;
                let domain = LinearDomain::from_tag(tag).ok_or_else(|| f.err(format!("unknown domain {tag:?}")))?;
                let m = f.usize()?;
                let d = f.usize()?;
                let reward = f.vec(d)?;
                let data = f.vec(m * d)?;
                let consumption = ConsumptionMatrix::new(m, d, data).map_err(|e| f.err(e.to_string()))?;
                Request::Linear(LinearRequest {
                    reward,
                    consumption,
                    domain,
                })
            }
            "auction" => Request::Auction(AuctionRequest {
                value: f.f64()?,
                competing_bid: f.f64()?,
            }),
            "matching" => {
                let m = f.usize()?;
                let lambda = f.f64()?;
                Request::Matching(MatchingRequest {
                    reward: f.vec(m)?,
                    lambda,
                })
            }
            "assortment" => {
                let m = f.usize()?;
                let cap = match f.word()? {
                    "-" => None,
                    w => Some(w.parse().map_err(|_| f.err(format!("bad cap {w:?}")))?),
                };
                let revenue = f.vec(m)?;
                let utility = f.vec(m)?;
                Request::Assortment(AssortmentRequest {
                    revenue,
                    utility,
                    max_size: cap,
                })
            }
            other => return Err(f.err(format!("unknown request kind {other:?}"))),
        };
        f.finish()?;
        out.push(req);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_all_kinds() {
        let reqs = vec![
            Request::Linear(LinearRequest {
                reward: vec![0.1, 1.0 / 3.0],
                consumption: ConsumptionMatrix::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap(),
                domain: LinearDomain::SubSimplex,
            }),
            Request::Auction(AuctionRequest {
                value: 2.5,
                competing_bid: 1e-17,
            }),
            Request::Matching(MatchingRequest {
                reward: vec![0.049787068367863944],
                lambda: 0.0002,
            }),
            Request::Assortment(AssortmentRequest {
                revenue: vec![3.0, 1.0],
                utility: vec![-0.25, 7.5],
                max_size: Some(1),
            }),
        ];
        let text = write_requests(&reqs);
        assert_eq!(parse_requests(&text).unwrap(), reqs);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let e = parse_requests("# header\nauction 1\n").unwrap_err();
        assert_eq!(
            e,
            StreamError::Parse {
                line: 2,
                message: "unexpected end of line".into()
            }
        );
        assert!(parse_requests("auction 1 2 3").is_err());
        assert!(parse_requests("bogus").is_err());
    }
}
