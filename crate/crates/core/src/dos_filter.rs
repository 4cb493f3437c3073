//! Gateway admission control.
//!
//! Every packet arriving at the gateway passes three checks before it can
//! reach the server: the sender's identity binding must verify under the
//! gateway key, the sender must hold at least `min_power` residual energy,
//! and its token bucket must have a token left. Admission consumes one
//! token and `per_packet_cost` energy. All state is per sender, so one
//! flooding node cannot change the decisions made for another.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::crypto::{hash, SessionKey, HASH_LEN};
use crate::protocol::{Id, Millis};

/// Token counts are compared with this slack so accumulated float error in
/// refills cannot starve a bucket that is exactly full.
const TOKEN_EPSILON: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("sender is not registered at the gateway")]
    UnknownSender,
    #[error("clock moved backwards: {now:?} < {last:?}")]
    ClockRegression { now: Millis, last: Millis },
    #[error("invalid admission policy: {0}")]
    InvalidPolicy(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdmissionPolicy {
    pub min_power: f64,
    /// Tokens per second.
    pub token_rate: f64,
    pub bucket_capacity: f64,
    pub per_packet_cost: f64,
}

impl AdmissionPolicy {
    pub fn new(
        min_power: f64,
        token_rate: f64,
        bucket_capacity: f64,
        per_packet_cost: f64,
    ) -> Result<Self, FilterError> {
        let p = AdmissionPolicy { min_power, token_rate, bucket_capacity, per_packet_cost };
        p.validate()?;
        Ok(p)
    }

    /// Defaults for a network whose sensors send `legit_rate` packets per
    /// second: twice that rate in tokens, two seconds of burst, min power 10,
    /// one unit per packet.
    pub fn for_legit_rate(legit_rate: f64) -> Self {
        let token_rate = 2.0 * legit_rate;
        AdmissionPolicy { min_power: 10.0, token_rate, bucket_capacity: 2.0 * token_rate, per_packet_cost: 1.0 }
    }

    pub fn validate(&self) -> Result<(), FilterError> {
        let fields = [self.min_power, self.token_rate, self.bucket_capacity, self.per_packet_cost];
        if fields.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(FilterError::InvalidPolicy("all fields must be positive and finite"))
        }
    }
}

/// Residual battery of a sender as seen by the gateway.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeEnergy {
    pub residual: f64,
    pub last_update: Millis,
}

impl NodeEnergy {
    pub fn new(residual: f64, now: Millis) -> Self {
        NodeEnergy { residual: residual.max(0.0), last_update: now }
    }

    pub fn recharge(&mut self, amount: f64, now: Millis) {
        self.residual += amount.max(0.0);
        self.last_update = now;
    }

    fn spend(&mut self, amount: f64, now: Millis) {
        self.residual = (self.residual - amount).max(0.0);
        self.last_update = now;
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TokenBucket {
    pub tokens: f64,
    pub capacity: f64,
    /// Tokens per second.
    pub rate: f64,
    pub last_refill: Millis,
}

impl TokenBucket {
    /// A full bucket.
    pub fn full(capacity: f64, rate: f64, now: Millis) -> Self {
        TokenBucket { tokens: capacity, capacity, rate, last_refill: now }
    }
}

/// tokens = min(capacity, tokens + rate·Δt).
pub fn refill(bucket: &TokenBucket, now: Millis) -> Result<TokenBucket, FilterError> {
    if now < bucket.last_refill {
        return Err(FilterError::ClockRegression { now, last: bucket.last_refill });
    }
    let elapsed_s = (now.0 - bucket.last_refill.0) as f64 / 1000.0;
    Ok(TokenBucket {
        tokens: (bucket.tokens + bucket.rate * elapsed_s).min(bucket.capacity),
        last_refill: now,
        ..*bucket
    })
}

/// Keyed-hash binding of a user identity to a gateway identity.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct BoundIdentity(pub [u8; HASH_LEN]);

/// binding = H(gw_key ‖ id_u ‖ id_gw).
pub fn bind_identity(gw_key: &SessionKey, id_u: &Id, id_gw: &Id) -> BoundIdentity {
    BoundIdentity(hash(&[&gw_key.key, id_u, id_gw]))
}

pub fn verify_binding(gw_key: &SessionKey, id_u: &Id, id_gw: &Id, binding: &BoundIdentity) -> bool {
    bind_identity(gw_key, id_u, id_gw) == *binding
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DropReason {
    LowPower,
    IdentityMismatch,
    RateExceeded,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FilterDecision {
    Admit,
    Drop(DropReason),
}

impl FilterDecision {
    pub fn is_admit(&self) -> bool {
        matches!(self, FilterDecision::Admit)
    }
}

/// What the gateway sees of a packet before looking at its payload.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Envelope {
    pub sender: Id,
    pub binding: BoundIdentity,
}

/// Per-sender filter state.
#[derive(Clone, Debug, PartialEq)]
pub struct SenderState {
    pub energy: NodeEnergy,
    pub bucket: TokenBucket,
}

impl SenderState {
    pub fn new(policy: &AdmissionPolicy, initial_energy: f64, now: Millis) -> Self {
        SenderState {
            energy: NodeEnergy::new(initial_energy, now),
            bucket: TokenBucket::full(policy.bucket_capacity, policy.token_rate, now),
        }
    }
}

/// Screens one packet from a known sender; see the module docs for the
/// order of checks. Dropped packets consume neither tokens nor energy.
pub fn admit(
    packet: &Envelope,
    sender: &mut SenderState,
    policy: &AdmissionPolicy,
    gw_key: &SessionKey,
    id_gw: &Id,
    now: Millis,
) -> Result<FilterDecision, FilterError> {
    if !verify_binding(gw_key, &packet.sender, id_gw, &packet.binding) {
        return Ok(FilterDecision::Drop(DropReason::IdentityMismatch));
    }
    if sender.energy.residual < policy.min_power {
        return Ok(FilterDecision::Drop(DropReason::LowPower));
    }
    sender.bucket = refill(&sender.bucket, now)?;
    if sender.bucket.tokens + TOKEN_EPSILON < 1.0 {
        return Ok(FilterDecision::Drop(DropReason::RateExceeded));
    }
    sender.bucket.tokens = (sender.bucket.tokens - 1.0).max(0.0);
    sender.energy.spend(policy.per_packet_cost, now);
    Ok(FilterDecision::Admit)
}

/// Drop counts by reason.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DropCounts {
    pub low_power: u64,
    pub identity: u64,
    pub rate: u64,
}

impl DropCounts {
    pub fn record(&mut self, reason: DropReason) {
        match reason {
            DropReason::LowPower => self.low_power += 1,
            DropReason::IdentityMismatch => self.identity += 1,
            DropReason::RateExceeded => self.rate += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.low_power + self.identity + self.rate
    }
}

/// The gateway's filter: its key and identity, the policy, and a table of
/// registered senders.
#[derive(Clone, Debug)]
pub struct DosFilter {
    id_gw: Id,
    gw_key: SessionKey,
    policy: AdmissionPolicy,
    senders: BTreeMap<Id, SenderState>,
    drops: DropCounts,
}

impl DosFilter {
    pub fn new(id_gw: Id, gw_key: SessionKey, policy: AdmissionPolicy) -> Result<Self, FilterError> {
        policy.validate()?;
        Ok(DosFilter { id_gw, gw_key, policy, senders: BTreeMap::new(), drops: DropCounts::default() })
    }

    pub fn id(&self) -> &Id {
        &self.id_gw
    }

    pub fn policy(&self) -> &AdmissionPolicy {
        &self.policy
    }

    /// Adds (or resets) a sender and returns the binding it must present.
    pub fn register_sender(&mut self, id_u: Id, initial_energy: f64, now: Millis) -> BoundIdentity {
        self.senders.insert(id_u, SenderState::new(&self.policy, initial_energy, now));
        bind_identity(&self.gw_key, &id_u, &self.id_gw)
    }

    pub fn sender(&self, id_u: &Id) -> Option<&SenderState> {
        self.senders.get(id_u)
    }

    pub fn drops(&self) -> DropCounts {
        self.drops
    }

    pub fn admit(&mut self, packet: &Envelope, now: Millis) -> Result<FilterDecision, FilterError> {
        let state = self.senders.get_mut(&packet.sender).ok_or(FilterError::UnknownSender)?;
        let decision = admit(packet, state, &self.policy, &self.gw_key, &self.id_gw, now)?;
        if let FilterDecision::Drop(reason) = decision {
            self.drops.record(reason);
        }
        Ok(decision)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::kdf;
    use proptest::prelude::*;

    const GW: Id = [0x6A; 16];

    fn gw_key() -> SessionKey {
        kdf(b"gateway master", b"gw").unwrap()
    }

    fn filter(policy: AdmissionPolicy) -> DosFilter {
        DosFilter::new(GW, gw_key(), policy).unwrap()
    }

    fn burst_policy() -> AdmissionPolicy {
        AdmissionPolicy::new(10.0, 10.0, 10.0, 1.0).unwrap()
    }

    #[test]
    fn binding_roundtrip_and_failures() {
        let k = gw_key();
        let b = bind_identity(&k, &[1; 16], &GW);
        assert_eq!(b, bind_identity(&k, &[1; 16], &GW));
        assert!(verify_binding(&k, &[1; 16], &GW, &b));
        assert!(!verify_binding(&k, &[1; 16], &[0x6B; 16], &b));
        let mut flipped = b;
        flipped.0[5] ^= 0x10;
        assert!(!verify_binding(&k, &[1; 16], &GW, &flipped));
    }

    #[test]
    fn bindings_distinct_across_gateways() {
        let k = gw_key();
        let bindings: std::collections::HashSet<_> =
            (0..=255u8).map(|g| bind_identity(&k, &[1; 16], &[g; 16])).collect();
        assert_eq!(bindings.len(), 256);
    }

    #[test]
    fn fresh_sender_admitted() {
        let mut f = filter(burst_policy());
        let binding = f.register_sender([1; 16], 100.0, Millis(0));
        let env = Envelope { sender: [1; 16], binding };
        assert_eq!(f.admit(&env, Millis(0)).unwrap(), FilterDecision::Admit);
        let s = f.sender(&[1; 16]).unwrap();
        assert_eq!(s.energy.residual, 99.0);
        assert_eq!(s.bucket.tokens, 9.0);
    }

    #[test]
    fn low_power_dropped() {
        let mut f = filter(burst_policy());
        let binding = f.register_sender([1; 16], 9.5, Millis(0));
        let env = Envelope { sender: [1; 16], binding };
        assert_eq!(f.admit(&env, Millis(0)).unwrap(), FilterDecision::Drop(DropReason::LowPower));
        assert_eq!(f.sender(&[1; 16]).unwrap().bucket.tokens, 10.0);
    }

    #[test]
    fn forged_binding_dropped() {
        let mut f = filter(burst_policy());
        f.register_sender([1; 16], 100.0, Millis(0));
        let env = Envelope { sender: [1; 16], binding: BoundIdentity([0; 32]) };
        assert_eq!(f.admit(&env, Millis(0)).unwrap(), FilterDecision::Drop(DropReason::IdentityMismatch));
        assert_eq!(f.drops().identity, 1);
    }

    #[test]
    fn unknown_sender_is_an_error() {
        let mut f = filter(burst_policy());
        let env = Envelope { sender: [9; 16], binding: BoundIdentity([0; 32]) };
        assert_eq!(f.admit(&env, Millis(0)), Err(FilterError::UnknownSender));
    }

    #[test]
    fn instantaneous_burst_admits_capacity() {
        let mut f = filter(burst_policy());
        let binding = f.register_sender([1; 16], 1000.0, Millis(0));
        let env = Envelope { sender: [1; 16], binding };
        let decisions: Vec<_> = (0..100).map(|_| f.admit(&env, Millis(0)).unwrap()).collect();
        assert_eq!(decisions.iter().filter(|d| d.is_admit()).count(), 10);
        assert_eq!(decisions.iter().filter(|d| **d == FilterDecision::Drop(DropReason::RateExceeded)).count(), 90);
        assert_eq!(f.drops().rate, 90);
    }

    #[test]
    fn refill_arithmetic() {
        let empty = TokenBucket { tokens: 0.0, capacity: 20.0, rate: 10.0, last_refill: Millis(0) };
        assert_eq!(refill(&empty, Millis(0)).unwrap(), empty);
        assert_eq!(refill(&empty, Millis(500)).unwrap().tokens, 5.0);
        assert_eq!(refill(&empty, Millis(3_600_000)).unwrap().tokens, 20.0);
        assert!(matches!(
            refill(&TokenBucket { last_refill: Millis(10), ..empty }, Millis(5)),
            Err(FilterError::ClockRegression { .. })
        ));
    }

    #[test]
    fn policy_validation_and_defaults() {
        assert!(AdmissionPolicy::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(AdmissionPolicy::new(1.0, f64::NAN, 1.0, 1.0).is_err());
        let d = AdmissionPolicy::for_legit_rate(1.0);
        assert_eq!((d.min_power, d.token_rate, d.bucket_capacity, d.per_packet_cost), (10.0, 2.0, 4.0, 1.0));
    }

    proptest! {
        // Over any horizon T from a full bucket, admissions ≤ capacity + rate·T;
        // energy never rises; another sender's decisions are unaffected.
        #[test]
        fn bucket_bound_energy_and_isolation(
            gaps in proptest::collection::vec(0u64..400, 1..300),
            rate in 0.5f64..20.0,
            capacity in 1.0f64..15.0,
        ) {
            let policy = AdmissionPolicy::new(1.0, rate, capacity, 0.5).unwrap();
            let mut f = filter(policy);
            let flood = f.register_sender([1; 16], 1e9, Millis(0));
            let quiet = f.register_sender([2; 16], 1e9, Millis(0));
            let mut reference = filter(policy);
            let quiet_ref = reference.register_sender([2; 16], 1e9, Millis(0));
            assert_eq!(quiet, quiet_ref);

            let mut now = 0u64;
            let mut admitted = 0u64;
            let mut last_energy = f64::INFINITY;
            for (i, gap) in gaps.iter().enumerate() {
                now += gap;
                if f.admit(&Envelope { sender: [1; 16], binding: flood }, Millis(now)).unwrap().is_admit() {
                    admitted += 1;
                }
                let e = f.sender(&[1; 16]).unwrap().energy.residual;
                prop_assert!(e <= last_energy);
                last_energy = e;
                if i % 5 == 0 {
                    let a = f.admit(&Envelope { sender: [2; 16], binding: quiet }, Millis(now)).unwrap();
                    let b = reference.admit(&Envelope { sender: [2; 16], binding: quiet }, Millis(now)).unwrap();
                    prop_assert_eq!(a, b);
                }
            }
            let bound = capacity + rate * now as f64 / 1000.0;
            prop_assert!(admitted as f64 <= bound + 1e-6, "{} > {}", admitted, bound);
        }

        #[test]
        fn decisions_are_deterministic(energy in 0.0f64..50.0, tokens in 0.0f64..10.0, t in 0u64..5000) {
            let policy = burst_policy();
            let k = gw_key();
            let binding = bind_identity(&k, &[1; 16], &GW);
            let env = Envelope { sender: [1; 16], binding };
            let state = SenderState {
                energy: NodeEnergy::new(energy, Millis(0)),
                bucket: TokenBucket { tokens, capacity: 10.0, rate: 10.0, last_refill: Millis(0) },
            };
            let (mut a, mut b) = (state.clone(), state);
            prop_assert_eq!(
                admit(&env, &mut a, &policy, &k, &GW, Millis(t)).unwrap(),
                admit(&env, &mut b, &policy, &k, &GW, Millis(t)).unwrap()
            );
            prop_assert_eq!(a, b);
        }
    }
}
