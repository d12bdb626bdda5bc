use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vndn::kernel::Action;
use vndn::mac::{Channel, ChannelModel, Delivery, Dest, Frame, MacEvent, MacParams, Medium, NodeId, Service};
use vndn::ndn::{Data, Name, INTEREST_HEADER_LEN};
use vndn::transport::{Encap, LINK_HEADER_LEN};
use vndn::{Fault, Scheduler, SimTime};

#[derive(Debug)]
enum Ev {
    Mac(MacEvent),
    Offer(NodeId),
}

impl From<MacEvent> for Ev {
    fn from(e: MacEvent) -> Self {
        Ev::Mac(e)
    }
}

impl Action for Ev {
    fn label(&self) -> &'static str {
        match self {
            Ev::Mac(_) => "mac",
            Ev::Offer(_) => "offer",
        }
    }
}

fn frame(src: NodeId, dest: Dest, bytes: u32) -> Frame {
    let name: Name = "/data/veh-1/0".parse().unwrap();
    Frame {
        src,
        dest,
        service: if dest == Dest::Broadcast {
            Service::Basic
        } else {
            Service::Full
        },
        medium: Medium::Wireless,
        bytes,
        encap: Encap::Native,
        payload: Data::new(name).into(),
    }
}

fn fault(e: impl std::fmt::Display) -> Fault {
    Fault::new(e.to_string())
}

/// One saturated broadcast sender, nothing to collide with: every frame
/// costs DIFS + mean backoff + airtime on average.
#[test]
fn single_sender_saturation_matches_closed_form() {
    const BYTES: u32 = 1121;
    let end = SimTime::from_secs(10);
    let mut ch = Channel::new(MacParams::default(), ChannelModel::Contention, 2, 9);
    ch.attach(0);
    ch.attach(1);
    let mut s: Scheduler<Ev> = Scheduler::new();
    for _ in 0..4 {
        ch.enqueue(&mut s, 0, frame(0, Dest::Broadcast, BYTES)).unwrap();
    }
    let mut delivered_bytes = 0u64;
    s.run_until(end, &mut |s: &mut Scheduler<Ev>, e: Ev| {
        let Ev::Mac(e) = e else { unreachable!() };
        let deliveries: Vec<Delivery> = ch.handle(s, e).map_err(fault)?;
        for d in deliveries {
            delivered_bytes += d.frame.bytes as u64;
            ch.enqueue(s, 0, frame(0, Dest::Broadcast, BYTES)).map_err(fault)?;
        }
        Ok(())
    })
    .unwrap();

    // DIFS 34 us + 7.5 slots of 9 us + (20 us + 1121*8 bits / 6 Mb/s)
    // = 1616.1667 us per frame, 8968 bits per frame.
    let expected_bps = 5_548_932.66;
    let goodput = delivered_bytes as f64 * 8.0 / 10.0;
    assert!(
        (goodput - expected_bps).abs() / expected_bps < 0.02,
        "goodput {goodput} vs {expected_bps}"
    );
    assert_eq!(ch.counters().collided, 0);
}

#[test]
fn unicast_under_light_load_is_reliable() {
    const FRAMES_PER_SENDER: u32 = 5_000;
    const BYTES: u32 = 1149;
    const AP: NodeId = 2;
    let mut ch = Channel::new(MacParams::default(), ChannelModel::Contention, 3, 4);
    for n in 0..3 {
        ch.attach(n);
    }
    let mut s: Scheduler<Ev> = Scheduler::new();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    // 500 frames/s per sender with jittered gaps: 2 * 500 * 1149 * 8 b/s is
    // about 6.4% of the full rate.
    for src in 0..2 {
        let mut t = 0u64;
        for _ in 0..FRAMES_PER_SENDER {
            t += rng.random_range(1_000_000..3_000_000);
            s.schedule(SimTime::from_nanos(t), Ev::Offer(src)).unwrap();
        }
    }
    s.run_until(SimTime::from_secs(30), &mut |s: &mut Scheduler<Ev>, e: Ev| {
        match e {
            Ev::Offer(src) => ch.enqueue(s, src, frame(src, Dest::Node(AP), BYTES)).map_err(fault)?,
            Ev::Mac(e) => {
                ch.handle(s, e).map_err(fault)?;
            }
        }
        Ok(())
    })
    .unwrap();
    ch.finish(s.now());

    let c = ch.counters();
    assert_eq!(c.enqueued, 2 * FRAMES_PER_SENDER as u64);
    assert!(c.conserved());
    let ratio = c.delivered as f64 / c.enqueued as f64;
    assert!(ratio >= 0.999, "delivery ratio {ratio}");
}

#[test]
fn successful_transmissions_never_overlap_and_counters_conserve() {
    let mut ch = Channel::new(MacParams::default(), ChannelModel::Contention, 8, 17);
    for n in 0..8 {
        ch.attach(n);
    }
    ch.enable_airtime_trace();
    let mut s: Scheduler<Ev> = Scheduler::new();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..4_000 {
        let src = rng.random_range(0..7);
        let t = rng.random_range(0..2_000_000_000u64);
        s.schedule(SimTime::from_nanos(t), Ev::Offer(src)).unwrap();
    }
    s.run_until(SimTime::from_secs(3), &mut |s: &mut Scheduler<Ev>, e: Ev| {
        match e {
            Ev::Offer(src) => {
                let dest = if src % 2 == 0 { Dest::Broadcast } else { Dest::Node(7) };
                ch.enqueue(s, src, frame(src, dest, 600)).map_err(fault)?
            }
            Ev::Mac(e) => {
                ch.handle(s, e).map_err(fault)?;
            }
        }
        Ok(())
    })
    .unwrap();
    ch.finish(s.now());

    let mut spans = ch.airtime_trace().unwrap().to_vec();
    assert!(!spans.is_empty());
    spans.sort();
    for w in spans.windows(2) {
        assert!(w[0].1 <= w[1].0, "{:?} overlaps {:?}", w[0], w[1]);
    }
    let total = ch.counters();
    assert!(total.collided > 0, "load high enough to collide");
    assert_eq!(total.delivered + total.collided + total.dropped(), total.enqueued);
    for n in 0..8 {
        assert!(ch.station_counters(n).conserved(), "node {n}");
    }
}

#[test]
fn service_asymmetry() {
    let p = MacParams::default();
    // Every wireless frame carries at least an interest header on a link header.
    let smallest = (INTEREST_HEADER_LEN + LINK_HEADER_LEN) as u32;
    for bytes in smallest..=1500 {
        assert!(
            p.airtime(bytes, Service::Basic) > p.airtime(bytes, Service::Full),
            "{bytes} bytes"
        );
    }
}
