#![allow(dead_code)]

use online_alloc::model::{
    AssortmentRequest, AuctionRequest, ConsumptionMatrix, LinearDomain, LinearRequest,
    MatchingRequest, Request,
};
use online_alloc::streams::{CorruptionMode, Placement, StreamKind, ValueDist};

pub fn binary(f: f64, b: f64) -> Request {
    Request::Linear(LinearRequest {
        reward: vec![f],
        consumption: ConsumptionMatrix::new(1, 1, vec![b]).unwrap(),
        domain: LinearDomain::Binary,
    })
}

pub fn linear(reward: Vec<f64>, m: usize, c: Vec<f64>, domain: LinearDomain) -> Request {
    let d = reward.len();
    Request::Linear(LinearRequest {
        reward,
        consumption: ConsumptionMatrix::new(m, d, c).unwrap(),
        domain,
    })
}

pub fn auction(value: f64, competing_bid: f64) -> Request {
    Request::Auction(AuctionRequest {
        value,
        competing_bid,
    })
}

pub fn matching(reward: Vec<f64>, lambda: f64) -> Request {
    Request::Matching(MatchingRequest { reward, lambda })
}

pub fn assortment(revenue: Vec<f64>, utility: Vec<f64>, max_size: Option<usize>) -> Request {
    Request::Assortment(AssortmentRequest {
        revenue,
        utility,
        max_size,
    })
}

/// A small instance of every generator family.
pub fn all_generators(m: usize, d: usize, horizon: usize) -> Vec<StreamKind> {
    let lp = |domain| StreamKind::IidLp {
        m,
        d,
        r_bar: 10.0,
        domain,
    };
    let auction = StreamKind::AuctionIid {
        v_bar: 2.0,
        values: ValueDist::Uniform { lo: 0.0, hi: 2.0 },
        bids: ValueDist::LogNormal {
            mean_log: -0.5,
            sd_log: 0.5,
        },
        correlated: true,
        rho: 0.3,
    };
    let assort = StreamKind::AssortmentIid {
        m,
        r_bar: 5.0,
        max_size: Some(2),
        rho: 0.2,
    };
    let q = if horizon.is_multiple_of(4) { 4 } else { 1 };
    vec![
        lp(LinearDomain::EqualitySimplex),
        lp(LinearDomain::SubSimplex),
        StreamKind::IidLp {
            m,
            d: 1,
            r_bar: 10.0,
            domain: LinearDomain::Binary,
        },
        StreamKind::ergodic_matching(m, 0.5),
        auction.clone(),
        assort,
        StreamKind::Periodic {
            q,
            base: Box::new(lp(LinearDomain::SubSimplex)),
        },
        StreamKind::Corrupted {
            base: Box::new(lp(LinearDomain::SubSimplex)),
            count: horizon / 8,
            mode: CorruptionMode::MaxConsumption,
            placement: Placement::Random,
        },
        StreamKind::Corrupted {
            base: Box::new(auction),
            count: horizon / 4,
            mode: CorruptionMode::ZeroReward,
            placement: Placement::Burst,
        },
        StreamKind::AdversarialLb {
            t_hat: horizon / 4,
            branch: 2,
        },
    ]
}
