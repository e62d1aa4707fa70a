//! Scheme drivers.
//!
//! Every scheme implements the same lifecycle over the simulated world:
//! deploy principals, register SPs, set up devices, authenticate, switch IdP.
//! Drivers also expose the SP's acceptance conditions as structured checks
//! so the impersonation search can explore them exhaustively.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::terms::Term;
use crate::world::{Annotation, PrincipalId, TraceEvent, World, WorldError};

mod impostor;
mod mobile_connect;
mod oauth;
mod openid2;
mod persona;
mod saw;
mod securekey;
mod shibboleth;
mod sync;
mod uaf;

/// Canonical scheme names accepted by the registry and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SchemeName {
    OpenId2,
    OAuth2,
    Oidc,
    MobileConnectLoa2,
    MobileConnectLoa3,
    MobileConnectAugmented,
    Shibboleth,
    Persona,
    PersonaFallback,
    SecureKey,
    Saw,
    SawAugmented,
    Sync15,
    Sync20,
    Impostor,
    UafAttested,
    UafNonAttested,
}

impl SchemeName {
    pub fn key(&self) -> &'static str {
        match self {
            SchemeName::OpenId2 => "openid2",
            SchemeName::OAuth2 => "oauth2",
            SchemeName::Oidc => "oidc",
            SchemeName::MobileConnectLoa2 => "mobile-connect-loa2",
            SchemeName::MobileConnectLoa3 => "mobile-connect-loa3",
            SchemeName::MobileConnectAugmented => "mobile-connect-augmented",
            SchemeName::Shibboleth => "shibboleth",
            SchemeName::Persona => "persona",
            SchemeName::PersonaFallback => "persona-fallback",
            SchemeName::SecureKey => "securekey",
            SchemeName::Saw => "saw",
            SchemeName::SawAugmented => "saw-augmented",
            SchemeName::Sync15 => "sync15",
            SchemeName::Sync20 => "sync20",
            SchemeName::Impostor => "impostor",
            SchemeName::UafAttested => "uaf-attested",
            SchemeName::UafNonAttested => "uaf-nonattested",
        }
    }

    pub fn display_name(&self) -> &'static str {
        match self {
            SchemeName::OpenId2 => "OpenID 2.0",
            SchemeName::OAuth2 => "OAuth 2.0",
            SchemeName::Oidc => "OpenID Connect",
            SchemeName::MobileConnectLoa2 => "Mobile Connect (LoA2)",
            SchemeName::MobileConnectLoa3 => "Mobile Connect",
            SchemeName::MobileConnectAugmented => "Mobile Connect (Augmented)",
            SchemeName::Shibboleth => "Shibboleth",
            SchemeName::Persona => "Mozilla Persona",
            SchemeName::PersonaFallback => "Mozilla Persona Fallback",
            SchemeName::SecureKey => "SecureKey Concierge",
            SchemeName::Saw => "SAW",
            SchemeName::SawAugmented => "SAW (Augmented)",
            SchemeName::Sync15 => "Firefox Sync 1.5",
            SchemeName::Sync20 => "Firefox Sync 2.0",
            SchemeName::Impostor => "Impostor",
            SchemeName::UafAttested => "FIDO UAF (Attested)",
            SchemeName::UafNonAttested => "FIDO UAF (Non-Attested)",
        }
    }

    pub fn all() -> &'static [SchemeName] {
        &[
            SchemeName::OpenId2,
            SchemeName::OAuth2,
            SchemeName::Oidc,
            SchemeName::MobileConnectLoa2,
            SchemeName::MobileConnectLoa3,
            SchemeName::MobileConnectAugmented,
            SchemeName::Shibboleth,
            SchemeName::Persona,
            SchemeName::PersonaFallback,
            SchemeName::SecureKey,
            SchemeName::Saw,
            SchemeName::SawAugmented,
            SchemeName::Sync15,
            SchemeName::Sync20,
            SchemeName::Impostor,
            SchemeName::UafAttested,
            SchemeName::UafNonAttested,
        ]
    }

    /// The fourteen schemes graded in the reference matrix, in row order.
    /// Mobile Connect is graded in its two-stage (LoA3) configuration.
    pub fn matrix_schemes() -> &'static [SchemeName] {
        &[
            SchemeName::OpenId2,
            SchemeName::Persona,
            SchemeName::OAuth2,
            SchemeName::Oidc,
            SchemeName::MobileConnectLoa3,
            SchemeName::Shibboleth,
            SchemeName::Saw,
            SchemeName::PersonaFallback,
            SchemeName::SecureKey,
            SchemeName::Sync15,
            SchemeName::Sync20,
            SchemeName::Impostor,
            SchemeName::UafNonAttested,
            SchemeName::UafAttested,
        ]
    }
}

impl fmt::Display for SchemeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for SchemeName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SchemeName::all()
            .iter()
            .find(|n| n.key() == s)
            .copied()
            .ok_or_else(|| format!("unknown scheme `{s}`"))
    }
}

// ---------------------------------------------------------------------------
// Taxonomy coordinates
// ---------------------------------------------------------------------------

/// How IdP-SP associations are established (and who owns the namespace).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Association {
    /// Decentralized: any implementer can be IdP or SP.
    A1,
    /// Explicit per-IdP registration by SPs.
    A2,
    /// Federated: members register with an operator, not with each other.
    A3,
    /// Bridged: the operator also conveys assertions on behalf of IdPs.
    A4,
    /// Non-attested credential manager (SP-managed namespace).
    A5,
    /// Attested credential manager.
    A6,
}

/// How user identity reaches the SP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Conveyance {
    /// IdP-generated assertion per access.
    G1,
    /// Assertion generation delegated to the user's browser.
    G2,
    /// The user authenticates directly to the SP (stored credential, echo).
    G3,
    /// The IdP proxies all traffic between user and SP.
    G4,
}

/// How the SP checks the identity proof.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Verification {
    /// The SP must query the IdP during validation.
    C1,
    /// Local verification.
    C2,
}

/// User-to-IdP authentication type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum AuthType {
    /// Remote IdP, single factor.
    T1a,
    /// Remote IdP, two independent factors (two-step).
    T1bStep,
    /// Remote IdP, local factor gating a possession factor (two-stage).
    T1bStage,
    /// Local IdP, device possession only.
    T2a,
    /// Local IdP, one local factor.
    T2b,
}

impl AuthType {
    /// Coordinate at the granularity used in the reference matrix.
    pub fn table_level(&self) -> &'static str {
        match self {
            AuthType::T1a | AuthType::T1bStep | AuthType::T1bStage => "T1",
            AuthType::T2a => "T2a",
            AuthType::T2b => "T2b",
        }
    }
}

/// Multi-device usage model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MultiDevice {
    /// Device-independent.
    M1,
    /// Portable hardware token addressed by the IdP.
    M2,
    /// Each new device authorized per SP (or per IdP).
    M3,
    /// New devices paired with an existing device.
    M4,
}

macro_rules! coord_display {
    ($ty:ty { $($v:ident => $s:expr),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $(Self::$v => $s),+ })
            }
        }
    };
}

coord_display!(Association { A1 => "A1", A2 => "A2", A3 => "A3", A4 => "A4", A5 => "A5", A6 => "A6" });
coord_display!(Conveyance { G1 => "G1", G2 => "G2", G3 => "G3", G4 => "G4" });
coord_display!(Verification { C1 => "C1", C2 => "C2" });
coord_display!(AuthType { T1a => "T1a", T1bStep => "T1b-i", T1bStage => "T1b-ii", T2a => "T2a", T2b => "T2b" });
coord_display!(MultiDevice { M1 => "M1", M2 => "M2", M3 => "M3", M4 => "M4" });

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Coords {
    pub association: Association,
    pub conveyance: Conveyance,
    pub verification: Verification,
    pub auth_type: AuthType,
    pub multi_device: MultiDevice,
}

impl Coords {
    /// Rendering at matrix granularity (T1a/T1b collapse to T1).
    pub fn table_row(&self) -> String {
        format!(
            "{} {} {} {} {}",
            self.association,
            self.conveyance,
            self.verification,
            self.auth_type.table_level(),
            self.multi_device
        )
    }

    /// Equality at matrix granularity.
    pub fn table_eq(&self, other: &Coords) -> bool {
        self.association == other.association
            && self.conveyance == other.conveyance
            && self.verification == other.verification
            && self.auth_type.table_level() == other.auth_type.table_level()
            && self.multi_device == other.multi_device
    }
}

impl fmt::Display for Coords {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {} {}",
            self.association, self.conveyance, self.verification, self.auth_type, self.multi_device
        )
    }
}

// ---------------------------------------------------------------------------
// Features and configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureValue {
    Flag(bool),
    Count(u64),
}

/// A configuration switch a scheme supports. `affects` links a flag to the
/// benefit whose verdict hinges on it (for footnote detection).
#[derive(Debug, Clone)]
pub struct OptionalFeature {
    pub key: &'static str,
    pub default: FeatureValue,
    pub affects: Option<crate::evaluator::Benefit>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Features {
    values: BTreeMap<String, FeatureValue>,
}

impl Features {
    pub fn set(&mut self, key: &str, value: FeatureValue) {
        self.values.insert(key.to_string(), value);
    }

    pub fn flag(&self, key: &str, default: bool) -> bool {
        match self.values.get(key) {
            Some(FeatureValue::Flag(b)) => *b,
            Some(FeatureValue::Count(n)) => *n != 0,
            None => default,
        }
    }

    pub fn count(&self, key: &str, default: u64) -> u64 {
        match self.values.get(key) {
            Some(FeatureValue::Count(n)) => *n,
            Some(FeatureValue::Flag(b)) => *b as u64,
            None => default,
        }
    }
}

/// Declared taxonomy coordinates and switches of one scheme.
#[derive(Debug, Clone)]
pub struct SchemeDescriptor {
    pub name: SchemeName,
    pub coords: Coords,
    pub optional_features: Vec<OptionalFeature>,
}

impl SchemeDescriptor {
    /// Credential-manager rows verify locally and never delegate assertion
    /// generation to a separate browser.
    pub fn validate(&self) -> Result<(), String> {
        let c = &self.coords;
        if matches!(c.association, Association::A5 | Association::A6) {
            if c.verification != Verification::C2 {
                return Err(format!("{}: A5/A6 requires C2", self.name));
            }
            if c.conveyance == Conveyance::G2 {
                return Err(format!("{}: A5/A6 excludes browser-delegated assertions", self.name));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DeployConfig {
    pub seed: u64,
    pub idps: usize,
    pub sps: usize,
    pub features: Features,
    /// Authority id the SP-side filter rejects (IdP filtering scenarios).
    pub blocked_authority: Option<String>,
}

impl Default for DeployConfig {
    fn default() -> Self {
        DeployConfig {
            seed: 0,
            idps: 2,
            sps: 2,
            features: Features::default(),
            blocked_authority: None,
        }
    }
}

impl DeployConfig {
    pub fn with_seed(seed: u64) -> Self {
        DeployConfig { seed, ..Default::default() }
    }
}

// ---------------------------------------------------------------------------
// Lifecycle state and outcomes
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    Deploy,
    RegisterSp,
    SetupDevice,
    Authenticate,
    SwitchIdp,
}

/// Principal handles and runtime bookkeeping for one deployed scheme.
#[derive(Debug, Clone)]
pub struct Deployment {
    pub scheme: SchemeName,
    pub user: PrincipalId,
    pub devices: Vec<PrincipalId>,
    pub idps: Vec<PrincipalId>,
    pub sps: Vec<PrincipalId>,
    pub operator: Option<PrincipalId>,
    pub mails: Vec<PrincipalId>,
    pub token: Option<PrincipalId>,
    /// The authority currently vouching for the user (IdP, mail provider,
    /// or primary device for credential managers).
    pub home_idp: PrincipalId,
    pub features: Features,
    pub blocked_authority: Option<String>,
    phases: Vec<(Phase, u64)>,
}

impl Deployment {
    pub fn mark_phase(&mut self, world: &World, phase: Phase) {
        self.phases.push((phase, world.step()));
    }

    pub fn phase_start(&self, phase: Phase) -> Option<u64> {
        self.phases.iter().rev().find(|(p, _)| *p == phase).map(|(_, s)| *s)
    }

    pub fn primary_device(&self) -> &PrincipalId {
        &self.devices[0]
    }

    pub fn feature_flag(&self, key: &str, default: bool) -> bool {
        self.features.flag(key, default)
    }
}

/// A deployed scheme plus its world.
#[derive(Debug, Clone)]
pub struct Run {
    pub world: World,
    pub dep: Deployment,
}

impl Run {
    pub fn trace_from(&self, start: u64) -> Vec<TraceEvent> {
        self.world
            .trace()
            .iter()
            .filter(|e| e.seq >= start)
            .cloned()
            .collect()
    }

    pub fn count_annotation(events: &[TraceEvent], a: Annotation) -> usize {
        events.iter().filter(|e| e.annotation == a).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureReason {
    /// A required leg could not be delivered (service outage).
    OutagePath,
    CertificateExpired,
    IdpFiltered,
    NoAccount,
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FailureReason::OutagePath => "outage-path",
            FailureReason::CertificateExpired => "certificate-expired",
            FailureReason::IdpFiltered => "idp-filtered",
            FailureReason::NoAccount => "no-account",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct AuthOutcome {
    pub success: bool,
    pub session_record: Option<Term>,
    pub failure: Option<FailureReason>,
    pub trace: Vec<TraceEvent>,
}

impl AuthOutcome {
    pub fn success(session: Term, trace: Vec<TraceEvent>) -> Self {
        AuthOutcome { success: true, session_record: Some(session), failure: None, trace }
    }

    pub fn failure(reason: FailureReason, trace: Vec<TraceEvent>) -> Self {
        AuthOutcome { success: false, session_record: None, failure: Some(reason), trace }
    }
}

#[derive(Debug, Clone)]
pub struct SwitchOutcome {
    /// SP accounts the user had to update by hand.
    pub per_sp_updates: usize,
    /// Migration stayed inside one vetted federation.
    pub intra_federation: bool,
    /// The old authority keeps forwarding on an interim basis.
    pub interim_forwarding: bool,
    pub trace: Vec<TraceEvent>,
}

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("device setup impossible: {0}")]
    SetupImpossible(String),
    #[error("IdP switch impossible: {0}")]
    SwitchImpossible(String),
    #[error(transparent)]
    World(#[from] WorldError),
}

// ---------------------------------------------------------------------------
// Acceptance conditions for the impersonation search
// ---------------------------------------------------------------------------

/// Something the attacker must have or obtain for one acceptance route.
#[derive(Debug, Clone)]
pub enum Requirement {
    /// Derivable from the attacker's closed knowledge.
    Derive(Term),
    /// Output of the named issuance oracle.
    Oracle(&'static str),
}

/// A protocol participant's willingness to issue material when presented
/// with valid inputs (an IdP minting a code after a password login, a mail
/// provider's mailbox yielding a fresh one-time link). Firing an oracle with
/// `emits` events cannot go unnoticed by the user.
#[derive(Debug, Clone)]
pub struct Oracle {
    pub id: &'static str,
    pub issuer: PrincipalId,
    pub needs: Vec<Term>,
    pub yields: Vec<Term>,
    pub emits: Vec<Annotation>,
}

/// One way to drive the SP into creating a session for the victim.
#[derive(Debug, Clone)]
pub struct Route {
    pub label: &'static str,
    pub requires: Vec<Requirement>,
    pub emits: Vec<Annotation>,
}

/// The SP's full acceptance surface for (victim, sp), as structured checks.
#[derive(Debug, Clone, Default)]
pub struct AcceptanceSpec {
    pub routes: Vec<Route>,
    pub oracles: Vec<Oracle>,
    /// Terms the attacker holds going in: challenges the protocol hands any
    /// client, plus the attacker's own fresh keys and nonces.
    pub attacker_seed: Vec<Term>,
    /// Class registrations for every synthetic term the spec references
    /// (seeded or not — oracle outputs stay unknown until fired).
    pub fresh_classes: Vec<(Term, crate::terms::SecretClass)>,
}

// ---------------------------------------------------------------------------
// Driver trait and registry
// ---------------------------------------------------------------------------

pub trait SchemeDriver: Sync {
    fn name(&self) -> SchemeName;
    fn descriptor(&self) -> SchemeDescriptor;

    /// Create principals and accounts per the scheme's association model.
    fn deploy(&self, cfg: &DeployConfig) -> Result<Run, SchemeError>;

    /// Register one SP with the authorities it needs. No-op (empty trace)
    /// for schemes without sponsoring.
    fn register_sp(&self, run: &mut Run, sp: &PrincipalId) -> Vec<TraceEvent>;

    /// Provision an additional, fresh device for the user.
    fn setup_device(&self, run: &mut Run, device: &PrincipalId) -> Result<Vec<TraceEvent>, SchemeError>;

    fn authenticate(
        &self,
        run: &mut Run,
        user: &PrincipalId,
        sp: &PrincipalId,
        device: &PrincipalId,
    ) -> AuthOutcome;

    /// Migrate the user to another IdP (or device, for credential managers).
    fn switch_idp(&self, run: &mut Run) -> Result<SwitchOutcome, SchemeError>;

    /// Structured acceptance conditions of `sp` for sessions of `victim`.
    fn acceptance(&self, run: &Run, victim: &PrincipalId, sp: &PrincipalId) -> AcceptanceSpec;
}

pub fn driver(name: SchemeName) -> &'static dyn SchemeDriver {
    match name {
        SchemeName::OpenId2 => &openid2::OpenId2,
        SchemeName::OAuth2 => &oauth::OAuthFamily { oidc: false },
        SchemeName::Oidc => &oauth::OAuthFamily { oidc: true },
        SchemeName::MobileConnectLoa2 => &mobile_connect::MobileConnect {
            loa3: false,
            augmented: false,
        },
        SchemeName::MobileConnectLoa3 => &mobile_connect::MobileConnect {
            loa3: true,
            augmented: false,
        },
        SchemeName::MobileConnectAugmented => &mobile_connect::MobileConnect {
            loa3: true,
            augmented: true,
        },
        SchemeName::Shibboleth => &shibboleth::Shibboleth,
        SchemeName::Persona => &persona::Persona { fallback: false },
        SchemeName::PersonaFallback => &persona::Persona { fallback: true },
        SchemeName::SecureKey => &securekey::SecureKey,
        SchemeName::Saw => &saw::Saw { augmented: false },
        SchemeName::SawAugmented => &saw::Saw { augmented: true },
        SchemeName::Sync15 => &sync::FirefoxSync { v2: false },
        SchemeName::Sync20 => &sync::FirefoxSync { v2: true },
        SchemeName::Impostor => &impostor::Impostor,
        SchemeName::UafAttested => &uaf::Uaf { attested: true },
        SchemeName::UafNonAttested => &uaf::Uaf { attested: false },
    }
}

/// Full lifecycle used for golden traces and classification: deploy, register
/// every SP, authenticate to each SP from the primary device, provision a
/// second device where the scheme allows it, authenticate once from it.
pub fn lifecycle_run(name: SchemeName, cfg: &DeployConfig) -> Result<Run, SchemeError> {
    let drv = driver(name);
    let mut run = drv.deploy(cfg)?;
    run.dep.mark_phase(&run.world, Phase::RegisterSp);
    for sp in run.dep.sps.clone() {
        drv.register_sp(&mut run, &sp);
    }
    run.dep.mark_phase(&run.world, Phase::Authenticate);
    let user = run.dep.user.clone();
    let dev = run.dep.primary_device().clone();
    for sp in run.dep.sps.clone() {
        drv.authenticate(&mut run, &user, &sp, &dev);
    }
    run.dep.mark_phase(&run.world, Phase::SetupDevice);
    let second = format!("{}-dev2", user.as_str());
    let second = run.world.add_principal(&second, crate::world::Role::Device, Some(&user));
    run.dep.devices.push(second.clone());
    if drv.setup_device(&mut run, &second).is_ok() {
        let sp1 = run.dep.sps[0].clone();
        drv.authenticate(&mut run, &user, &sp1, &second);
    }
    Ok(run)
}

// Shared helpers for driver implementations.
pub(crate) mod helpers {
    use super::*;
    use crate::world::{Role, Scope};

    /// Standard principal cast: user `alice` with one browser device.
    pub fn base_world(cfg: &DeployConfig, scheme: SchemeName) -> (World, Deployment) {
        let mut w = World::new(cfg.seed);
        let user = w.add_principal("alice", Role::User, None);
        let dev = w.add_principal("alice-dev1", Role::Device, Some(&user));
        w.add_principal("attacker", Role::Attacker, None);
        let mut sps = Vec::new();
        for i in 1..=cfg.sps {
            sps.push(w.add_principal(&format!("sp{i}"), Role::SP, None));
        }
        let mut dep = Deployment {
            scheme,
            user,
            devices: vec![dev],
            idps: Vec::new(),
            sps,
            operator: None,
            mails: Vec::new(),
            token: None,
            home_idp: PrincipalId::new("unset"),
            features: cfg.features.clone(),
            blocked_authority: cfg.blocked_authority.clone(),
            phases: Vec::new(),
        };
        dep.phases.push((Phase::Deploy, 0));
        (w, dep)
    }

    /// Record the identifiers an SP account exposes for linkage analysis.
    pub fn put_account_ids(w: &mut World, sp: &PrincipalId, user: &PrincipalId, ids: Term) {
        w.put(sp, &format!("ids:{user}"), ids, Scope::User(user.clone()));
    }

    pub fn create_session(
        w: &mut World,
        sp: &PrincipalId,
        user: &PrincipalId,
        account: Term,
        device: &PrincipalId,
    ) -> Term {
        let record = Term::pair(account, Term::atom(device.as_str()));
        w.put(sp, &format!("session:{user}"), record.clone(), Scope::User(user.clone()));
        record
    }

    pub fn has_session(w: &World, sp: &PrincipalId, user: &PrincipalId) -> bool {
        w.store_term(sp, &format!("session:{user}")).is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_covers_all_names_and_keys_round_trip() {
        for name in SchemeName::all() {
            let d = driver(*name);
            assert_eq!(d.name(), *name);
            assert_eq!(name.key().parse::<SchemeName>().unwrap(), *name);
        }
        assert!("no-such-scheme".parse::<SchemeName>().is_err());
    }

    #[test]
    fn descriptors_validate() {
        for name in SchemeName::all() {
            driver(*name).descriptor().validate().unwrap();
        }
    }

    #[test]
    fn matrix_rows_are_fourteen() {
        assert_eq!(SchemeName::matrix_schemes().len(), 14);
    }
}
