use super::{Headroom, PrimalSolution, SolveError};
use crate::model::{Action, AuctionRequest};

/// Second-price auction with the shaded bid `v / (1 + mu)`; ties are won.
pub fn solve_auction(req: &AuctionRequest, mu: &[f64]) -> Result<PrimalSolution, SolveError> {
    solve(req, mu, true)
}

/// As [`solve_auction`], but a win whose payment would not fit is forgone.
pub fn solve_auction_within(
    req: &AuctionRequest,
    mu: &[f64],
    room: Headroom<'_>,
) -> Result<PrimalSolution, SolveError> {
    solve(req, mu, room.fits(0, req.competing_bid))
}

fn solve(req: &AuctionRequest, mu: &[f64], affordable: bool) -> Result<PrimalSolution, SolveError> {
    if mu.len() != 1 {
        return Err(SolveError::Dimension {
            request: 1,
            mu: mu.len(),
        });
    }
    let bid = req.value / (1.0 + mu[0]);
    let win = affordable && bid >= req.competing_bid;
    let (reward, pay) = if win {
        (req.value - req.competing_bid, req.competing_bid)
    } else {
        (0.0, 0.0)
    };
    Ok(PrimalSolution {
        action: Action::Bid { bid, win },
        reward,
        consumption: vec![pay],
        conjugate: reward - mu[0] * pay,
    })
}

pub(super) fn conjugate(req: &AuctionRequest, mu: f64) -> f64 {
    (req.value - (1.0 + mu) * req.competing_bid).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(value: f64, competing_bid: f64) -> AuctionRequest {
        AuctionRequest {
            value,
            competing_bid,
        }
    }

    #[test]
    fn shaded_bid_wins() {
        let sol = solve_auction(&a(2.0, 0.8), &[1.0]).unwrap();
        assert_eq!(sol.action, Action::Bid { bid: 1.0, win: true });
        assert!((sol.reward - 1.2).abs() < 1e-15);
        assert_eq!(sol.consumption, vec![0.8]);
    }

    #[test]
    fn zero_mu_bids_truthfully() {
        let sol = solve_auction(&a(3.5, 9.0), &[0.0]).unwrap();
        assert_eq!(sol.action, Action::Bid { bid: 3.5, win: false });
    }

    #[test]
    fn shaded_bid_loses() {
        let sol = solve_auction(&a(2.0, 1.5), &[1.0]).unwrap();
        assert_eq!(sol.action, Action::Bid { bid: 1.0, win: false });
        assert_eq!((sol.reward, sol.consumption[0]), (0.0, 0.0));
    }

    #[test]
    fn tie_is_a_win() {
        let sol = solve_auction(&a(2.0, 1.0), &[1.0]).unwrap();
        assert!(matches!(sol.action, Action::Bid { win: true, .. }));
        assert_eq!(sol.conjugate, 0.0);
    }

    #[test]
    fn multi_resource_mu_is_rejected() {
        assert!(solve_auction(&a(1.0, 0.5), &[0.0, 0.0]).is_err());
    }
}
