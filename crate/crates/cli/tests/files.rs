use fbd_cli::io::{format_autocorr, format_channels, format_interferograms, parse_channels, parse_interferograms};
use fbd_core::{build_interferograms, ChannelSet, Sequence, SourceAutocorr};
use proptest::prelude::*;

fn any_finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO | prop::num::f64::NEGATIVE,
        -1.0..1.0f64,
    ]
}

fn channel_set() -> impl Strategy<Value = ChannelSet> {
    (1usize..5, 1usize..30, -20isize..20).prop_flat_map(|(nr, len, origin)| {
        prop::collection::vec(prop::collection::vec(any_finite(), len), nr).prop_map(move |rows| {
            ChannelSet::new(rows.into_iter().map(|r| Sequence::new(origin, r).unwrap()).collect()).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn channel_files_round_trip_bit_exactly(c in channel_set()) {
        let back = parse_channels(&format_channels(&c)).unwrap();
        prop_assert_eq!(back.origin(), c.origin());
        for (a, b) in back.channels().iter().zip(c.channels()) {
            let bits = |s: &Sequence| s.samples().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(a), bits(b));
        }
    }

    #[test]
    fn interferogram_files_round_trip_bit_exactly(rows in prop::collection::vec(prop::collection::vec(-1e3..1e3f64, 7), 1..5), maxlag in 0usize..7) {
        let g = build_interferograms(&ChannelSet::from_rows(rows).unwrap(), maxlag).unwrap();
        let back = parse_interferograms(&format_interferograms(&g)).unwrap();
        prop_assert_eq!(back.nr(), g.nr());
        prop_assert_eq!(back.maxlag(), g.maxlag());
        for (a, b) in back.entries().iter().zip(g.entries()) {
            for (x, y) in a.samples().iter().zip(b.samples()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
}

#[test]
fn autocorrelation_is_written_two_sided() {
    let sa = SourceAutocorr::new(vec![1.0, 0.25, -0.125]).unwrap();
    let c = parse_channels(&format_autocorr(&sa)).unwrap();
    assert_eq!(c.origin(), -2);
    assert_eq!(c.channel(0).samples(), &[-0.125, 0.25, 1.0, 0.25, -0.125]);
}

#[test]
fn channel_file_layout() {
    let c = ChannelSet::from_rows(vec![vec![1.0, 0.5], vec![-2.0, 0.1]]).unwrap();
    let text = format_channels(&c);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# fbd-channelset nr=2 origin=0 len=2");
    assert_eq!(lines[1], "1.0000000000000000e0,-2.0000000000000000e0");
    assert_eq!(lines.len(), 3);
}

#[test]
fn malformed_files_are_rejected() {
    assert!(parse_channels("").is_err());
    assert!(parse_channels("# something-else nr=1 origin=0 len=1\n1\n").is_err());
    assert!(parse_channels("# fbd-channelset nr=2 origin=0 len=1\n1\n").is_err());
    assert!(parse_channels("# fbd-channelset nr=1 origin=0 len=2\n1\n").is_err());
    assert!(parse_channels("# fbd-channelset nr=1 origin=0 len=1\nabc\n").is_err());
    assert!(parse_channels("# fbd-channelset nr=1 origin=0 len=1\nNaN\n").is_err());
    let ok = "# fbd-interferograms nr=1 maxlag=1\n# pair 0 0\n-1,0\n0,1\n1,0\n";
    assert!(parse_interferograms(ok).is_ok());
    assert!(parse_interferograms(&ok.replace("pair 0 0", "pair 0 1")).is_err());
    assert!(parse_interferograms(&ok.replace("1,0\n", "")).is_err());
    assert!(parse_interferograms(&ok.replace("-1,0", "1,0")).is_err());
}
