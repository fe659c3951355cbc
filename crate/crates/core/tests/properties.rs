use proptest::prelude::*;

use syncmarket::channel_delay::{ar_delays, dt_delays, link_rate, total_sync_delay, DelayBreakdown};
use syncmarket::market_model::{ad_value, validate_scenario, ArTask, DtTask, MarketScenario, ScenarioBuilder};
use syncmarket::mechanisms::{
    run_omniscient, truthful_physical_bids, truthful_virtual_bids, AlphaFactor, Epvisa, MarketContext, Mechanism,
    PhysicalAward, PhysicalBid, Pvisa, ScoringRule, VirtualBid,
};
use syncmarket::scenario_gen::{sample_scenario, Dist, GeneratorConfig};
use syncmarket::welfare::{brute_force_benchmark, score_outcome};

fn small_config(i: usize, k: usize, seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        num_avs: i,
        num_perf_mbps: k,
        cache_size: Dist::uniform(0.0, 6.0),
        rng_seed: seed,
        ..GeneratorConfig::default()
    }
}

fn small_scenario() -> impl Strategy<Value = MarketScenario> {
    (1usize..=4, 1usize..=4, any::<u64>(), 0u64..100)
        .prop_map(|(i, k, seed, t)| sample_scenario(&small_config(i, k, seed), t).unwrap())
}

fn award(ctx: &MarketContext) -> PhysicalAward {
    PhysicalAward { av: 0, payment: 0.0, deadline_s: ctx.scenario.avs[0].dt_task.deadline_s, tie: false }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn ad_value_is_homogeneous(nu in 0.0..10.0f64, m in 0.0..100.0f64, c in 0.0..10.0f64) {
        let lhs = ad_value(c * nu, m);
        let rhs = c * ad_value(nu, m);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
    }

    #[test]
    fn generated_scenarios_validate_and_respect_caches(s in small_scenario()) {
        let again = validate_scenario(s.clone()).unwrap();
        prop_assert_eq!(&again, &s);
        prop_assert_eq!(validate_scenario(again.clone()).unwrap(), again);
        for (i, row) in s.matches.h.iter().enumerate() {
            for &h in row {
                prop_assert!(h >= 0.0 && h <= s.avs[i].cache_size);
            }
        }
    }

    #[test]
    fn sampling_is_deterministic(seed in any::<u64>(), t in 0u64..1000) {
        let c = small_config(3, 3, seed);
        prop_assert_eq!(sample_scenario(&c, t).unwrap(), sample_scenario(&c, t).unwrap());
    }

    #[test]
    fn rate_is_monotone(
        b in 1.0..1e8f64, g in 0.0..2.0f64, p in 0.0..1.0f64, n in 1e-6..1.0f64, f in 1.0..3.0f64,
    ) {
        let r = link_rate(b, g, p, n).unwrap();
        prop_assert!(link_rate(b * f, g, p, n).unwrap() >= r);
        prop_assert!(link_rate(b, g * f, p, n).unwrap() >= r);
        prop_assert!(link_rate(b, g, p * f, n).unwrap() >= r);
        prop_assert!(link_rate(b, g, p, n * f).unwrap() <= r);
    }

    #[test]
    fn delays_scale_linearly(
        s in 0.0..1e7f64, e in 0.0..200.0f64, c in 0.0..5.0f64, rate in 1e5..1e8f64,
        h in 0u32..30, h2 in 0u32..30,
    ) {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300);
        let task = DtTask { size_bits: s, cycles_per_bit: e, deadline_s: 1.0 };
        let d1 = dt_delays(&task, rate, 3.6e9).unwrap();
        let dc = dt_delays(&DtTask { size_bits: c * s, ..task }, rate, 3.6e9).unwrap();
        prop_assert!(close(dc.transmit_s, c * d1.transmit_s));
        prop_assert!(close(dc.compute_s, c * d1.compute_s));

        let ar = ArTask { layer_size_bits: s, cycles_per_bit: e };
        let a1 = ar_delays(&ar, h as f64, rate, 3.6e9, 19e9).unwrap();
        let a2 = ar_delays(&ar, h2 as f64, rate, 3.6e9, 19e9).unwrap();
        let ratio = (h as f64 + 1.0) / (h2 as f64 + 1.0);
        prop_assert!(close(a1.transmit_s, ratio * a2.transmit_s));
        prop_assert!(close(a1.compute_s, ratio * a2.compute_s));
    }

    #[test]
    fn total_delay_is_additive(a in 0.0..5.0f64, b in 0.0..5.0f64, c in 0.0..5.0f64, d in 0.0..5.0f64) {
        let dt = DelayBreakdown { transmit_s: a, compute_s: b };
        let ar = DelayBreakdown { transmit_s: c, compute_s: d };
        let both = total_sync_delay(true, &dt, true, &ar);
        prop_assert_eq!(both, total_sync_delay(true, &dt, false, &ar) + total_sync_delay(false, &dt, true, &ar));
        prop_assert!(both >= 0.0);
        prop_assert_eq!(total_sync_delay(false, &dt, false, &ar), 0.0);
    }

    #[test]
    fn virtual_allocation_is_homogeneous(
        bids in prop::collection::vec(0.0..10.0f64, 2..6), c in 0.01..100.0f64, alpha in 1.0..3.0f64,
    ) {
        let k = bids.len() - 1;
        let s = ScenarioBuilder::new(&[1.0], vec![vec![0.0; k + 1]]).delays(0.5, 0.0).build().unwrap();
        let ctx = MarketContext::new(&s).unwrap();
        let base: Vec<VirtualBid> = bids.iter().enumerate().map(|(i, &p)| VirtualBid { mbp_id: i, price: p }).collect();
        let scaled: Vec<VirtualBid> = base.iter().map(|b| VirtualBid { price: c * b.price, ..*b }).collect();
        let mechs: [Box<dyn Mechanism>; 2] = [
            Box::new(Pvisa::new(0.0)),
            Box::new(Epvisa::new(ScoringRule::zero(), AlphaFactor::new(alpha).unwrap(), 0.0)),
        ];
        for m in &mechs {
            let o1 = m.virtual_stage(&ctx, &award(&ctx), &base).unwrap();
            let oc = m.virtual_stage(&ctx, &award(&ctx), &scaled).unwrap();
            prop_assert_eq!(o1.winner_mbp, oc.winner_mbp);
            let expected = c * o1.payment_ar;
            prop_assert!((oc.payment_ar - expected).abs() <= 1e-12 * expected.abs().max(1e-300));
        }
    }

    #[test]
    fn price_factor_extremes(bids in prop::collection::vec(0.01..10.0f64, 3..7), brand in 0.0..10.0f64) {
        let k = bids.len();
        let s = ScenarioBuilder::new(&[1.0], vec![vec![0.0; k + 1]]).build().unwrap();
        let ctx = MarketContext::new(&s).unwrap();
        let mut v = vec![VirtualBid { mbp_id: 0, price: brand }];
        v.extend(bids.iter().enumerate().map(|(i, &p)| VirtualBid { mbp_id: i + 1, price: p }));
        let mut sorted = bids.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let never = Epvisa::new(ScoringRule::zero(), AlphaFactor::one(), brand);
        if sorted[0] > sorted[1] {
            prop_assert_ne!(never.virtual_stage(&ctx, &award(&ctx), &v).unwrap().winner_mbp, Some(0));
        }
        let always = Epvisa::new(ScoringRule::zero(), AlphaFactor::new(1e9).unwrap(), brand);
        prop_assert_eq!(always.virtual_stage(&ctx, &award(&ctx), &v).unwrap().winner_mbp, Some(0));
    }

    #[test]
    fn ordering_chain_and_accounting(s in small_scenario(), b0 in 0.0..3.0f64, alpha in 1.0..3.0f64) {
        let (brute, _) = brute_force_benchmark(&s).unwrap();
        let ctx = MarketContext::new(&s).unwrap();
        let omni = run_omniscient(&s).map(|o| o.total_welfare).unwrap_or(0.0);
        prop_assert!(brute.total >= omni);
        let mechs: [Box<dyn Mechanism>; 2] = [
            Box::new(Pvisa::new(b0)),
            Box::new(Epvisa::new(
                ScoringRule::Efficient { gamma: 1.0, brand_rate: 0.5, perf_rate: 1.0 },
                AlphaFactor::new(alpha).unwrap(),
                b0,
            )),
        ];
        for m in &mechs {
            let o = m.run_truthful(&ctx).unwrap();
            prop_assert!(omni >= o.total_welfare);
            prop_assert!(o.payment_dt >= 0.0 && o.payment_ar >= 0.0);
            if let Some(av) = o.winner_av {
                prop_assert!(o.display_duration_s <= s.avs[av].dt_task.deadline_s);
            }
            let r = score_outcome(&s, &o).unwrap();
            prop_assert!((r.total - o.total_welfare).abs() <= 1e-12 * r.total.abs().max(1.0));
            prop_assert!(r.w_dt >= 0.0 && r.w_brand >= 0.0 && r.w_perf >= 0.0);
        }
    }

    #[test]
    fn second_price_is_individually_rational(s in small_scenario()) {
        let ctx = MarketContext::new(&s).unwrap();
        let o = Pvisa::new(0.0).run_truthful(&ctx).unwrap();
        if let Some(av) = o.winner_av {
            prop_assert!(o.payment_dt <= s.avs[av].valuation);
        }
    }

    #[test]
    fn zero_rule_unit_factor_matches_pvisa(s in small_scenario()) {
        let ctx = MarketContext::new(&s).unwrap();
        let pv = Pvisa::new(0.0);
        let ep = Epvisa::new(ScoringRule::zero(), AlphaFactor::one(), 0.0);
        let phys = truthful_physical_bids(&s, false);
        let a = pv.physical_stage(&ctx, &phys).unwrap();
        let b = ep.physical_stage(&ctx, &phys).unwrap();
        prop_assume!(!a.is_some_and(|x| x.tie));
        prop_assert_eq!(a.map(|x| x.av), b.map(|x| x.av));
        if let Some(w) = a {
            let v = truthful_virtual_bids(&s, w.av, 0.0);
            let mut perf: Vec<f64> = v[1..].iter().map(|b| b.price).collect();
            perf.sort_by(|x, y| y.total_cmp(x));
            prop_assume!(perf.len() < 2 || perf[0] > perf[1]);
            let x = pv.virtual_stage(&ctx, &w, &v).unwrap();
            let y = ep.virtual_stage(&ctx, &w, &v).unwrap();
            prop_assert_eq!(x.winner_mbp, y.winner_mbp);
        }
    }

    #[test]
    fn raising_a_price_keeps_a_winner_winning(s in small_scenario(), bump in 0.0..2.0f64, rate in 0.0..3.0f64) {
        let ctx = MarketContext::new(&s).unwrap();
        let m = Epvisa::new(ScoringRule::Efficient { gamma: 1.0, brand_rate: rate, perf_rate: rate }, AlphaFactor::one(), 0.0);
        let mut phys: Vec<PhysicalBid> = truthful_physical_bids(&s, true);
        if let Some(w) = m.physical_stage(&ctx, &phys).unwrap() {
            phys[w.av].price += bump;
            prop_assert_eq!(m.physical_stage(&ctx, &phys).unwrap().map(|x| x.av), Some(w.av));
        }
    }

    #[test]
    fn welfare_is_linear_in_valuation(s in small_scenario(), c in 0.0..5.0f64) {
        let o = Pvisa::new(0.0).run_truthful(&MarketContext::new(&s).unwrap()).unwrap();
        if let Some(av) = o.winner_av {
            let r1 = score_outcome(&s, &o).unwrap();
            let mut scaled = s.clone();
            scaled.avs[av].valuation *= c;
            let rc = score_outcome(&scaled, &o).unwrap();
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
            prop_assert!(close(rc.w_dt, c * r1.w_dt));
            prop_assert!(close(rc.w_brand, c * r1.w_brand));
            prop_assert!(close(rc.w_perf, c * r1.w_perf));
        }
    }
}
