//! Firefox Sync driver (1.5 and 2.0).
//!
//! A password manager: per-SP site passwords live in a vault on the user's
//! device (plaintext on disk by default) and authentication is an ordinary
//! password login auto-filled by the browser. The synchronization server only
//! ever holds ciphertext.
//!
//! The versions differ in key handling. 1.5 encrypts the vault under a
//! randomly generated key that is pair-transferred to new devices; losing
//! every device loses the key. 2.0 derives separate authentication and
//! encryption keys from the sync password, so a new device needs only that
//! password — and the server-side material is exactly as strong as it.

use crate::terms::{SecretClass, SecretId, Term};
use crate::world::{Annotation, Channel, PrincipalId, Role, Scope};

use super::helpers::*;
use super::*;

pub struct FirefoxSync {
    pub v2: bool,
}

fn site_pw_name(user: &PrincipalId, sp: &PrincipalId) -> String {
    format!("sitepw.{user}.{sp}")
}

fn site_account(user: &PrincipalId, sp: &PrincipalId) -> Term {
    Term::atom(format!("acct.{user}.{sp}"))
}

impl FirefoxSync {
    fn vault_for(user: &PrincipalId, sps: &[PrincipalId]) -> Term {
        let entries: Vec<Term> = sps
            .iter()
            .map(|sp| {
                let pw = Term::WeakSecret(SecretId::new(site_pw_name(user, sp)));
                Term::pair(site_account(user, sp), pw)
            })
            .collect();
        Term::list(&entries)
    }

    fn vault_term(&self, run: &Run) -> Term {
        Self::vault_for(&run.dep.user, &run.dep.sps)
    }
}

impl SchemeDriver for FirefoxSync {
    fn name(&self) -> SchemeName {
        if self.v2 {
            SchemeName::Sync20
        } else {
            SchemeName::Sync15
        }
    }

    fn descriptor(&self) -> SchemeDescriptor {
        SchemeDescriptor {
            name: self.name(),
            coords: Coords {
                association: Association::A5,
                conveyance: Conveyance::G3,
                verification: Verification::C2,
                auth_type: AuthType::T2a,
                multi_device: MultiDevice::M4,
            },
            optional_features: vec![
                // Off by default: the on-disk vault is plaintext unless the
                // user opts into a separate master password.
                OptionalFeature {
                    key: "master-password",
                    default: FeatureValue::Flag(false),
                    affects: None,
                },
            ],
        }
    }

    fn deploy(&self, cfg: &DeployConfig) -> Result<Run, SchemeError> {
        if cfg.sps == 0 {
            return Err(SchemeError::InvalidConfig("need at least one SP".into()));
        }
        let (mut w, mut dep) = base_world(cfg, self.name());
        let server = w.add_principal("syncserver", Role::SyncServer, None);
        dep.idps = Vec::new(); // the device is the IdP
        dep.home_idp = dep.primary_device().clone();
        dep.operator = None;
        let user = dep.user.clone();
        let dev = dep.primary_device().clone();

        // Site accounts: per-SP username and password, hash held by the SP.
        for sp in dep.sps.clone() {
            let pw = w.weak_secret(&user, &site_pw_name(&user, &sp));
            let acct = site_account(&user, &sp);
            w.make_public(acct.clone());
            w.put(&sp, &format!("pwhash:{user}"), Term::hash(pw.clone()), Scope::User(user.clone()));
            w.put(&sp, &format!("account:{user}"), acct.clone(), Scope::User(user.clone()));
            put_account_ids(&mut w, &sp, &user, acct);
        }

        // The vault (plaintext on the device) and the sync account.
        w.make_public(Term::atom("enc"));
        w.make_public(Term::atom("auth"));
        let sync_pw = w.weak_secret(&user, &format!("syncpw.{user}"));
        w.put(&user, "sync-password", sync_pw.clone(), Scope::User(user.clone()));
        w.put(&dev, "input:sync-password", sync_pw.clone(), Scope::User(user.clone()));

        let vault = Self::vault_for(&user, &dep.sps);
        if dep.features.flag("master-password", false) {
            let mpw = w.weak_secret(&user, &format!("masterpw.{user}"));
            w.put(&user, "master-password", mpw.clone(), Scope::User(user.clone()));
            let disk_key = Term::kdf(mpw, Term::atom("disk"));
            w.make_public(Term::atom("disk"));
            w.put(&dev, "vault", Term::sym_enc(disk_key, vault.clone()), Scope::User(user.clone()));
        } else {
            w.put(&dev, "vault", vault.clone(), Scope::User(user.clone()));
        }

        let ciphertext = if self.v2 {
            let auth_key = Term::kdf(sync_pw.clone(), Term::atom("auth"));
            w.put(
                &server,
                &format!("authhash:{user}"),
                Term::hash(auth_key),
                Scope::User(user.clone()),
            );
            Term::sym_enc(Term::kdf(sync_pw.clone(), Term::atom("enc")), vault)
        } else {
            let key = w.sym_key(&dev.clone(), &format!("synckey.{user}"), true);
            w.put(&dev, "sync-key", key.clone(), Scope::User(user.clone()));
            w.put(
                &server,
                &format!("pwhash:{user}"),
                Term::hash(sync_pw.clone()),
                Scope::User(user.clone()),
            );
            Term::sym_enc(key, vault)
        };
        // Initial upload of the encrypted vault.
        let _ = w.send(Channel::web(&dev, &server), ciphertext.clone(), Annotation::None);
        w.put(&server, &format!("vault-ct:{user}"), ciphertext, Scope::User(user.clone()));
        Ok(Run { world: w, dep })
    }

    fn register_sp(&self, _run: &mut Run, _sp: &PrincipalId) -> Vec<TraceEvent> {
        Vec::new() // SPs are plain password sites, nothing to sponsor
    }

    fn setup_device(&self, run: &mut Run, device: &PrincipalId) -> Result<Vec<TraceEvent>, SchemeError> {
        let start = run.world.step();
        let user = run.dep.user.clone();
        let server = PrincipalId::new("syncserver");
        let vault = self.vault_term(run);

        if self.v2 {
            // Typing the sync password is the whole setup.
            let sync_pw = run.world.store_term(&user, "sync-password").cloned().expect("deployed");
            run.world
                .send(Channel::web(&user, device), sync_pw.clone(), Annotation::UserAction)
                .map_err(SchemeError::from)?;
            run.world.put(device, "input:sync-password", sync_pw, Scope::User(user.clone()));
            let ct = run
                .world
                .store_term(&server, &format!("vault-ct:{user}"))
                .cloned()
                .expect("uploaded at deploy");
            run.world
                .send(Channel::web(&server, device), ct, Annotation::DeviceSetup)
                .map_err(SchemeError::from)?;
            run.world.put(device, "vault", vault, Scope::User(user.clone()));
        } else {
            // Pairing: an existing device transfers the vault key over a
            // short-code-verified out-of-band channel.
            let paired_source = run
                .dep
                .devices
                .iter()
                .find(|d| *d != device && run.world.store_term(d, "sync-key").is_some())
                .cloned();
            let Some(source) = paired_source else {
                return Err(SchemeError::SetupImpossible(
                    "pairing requires an existing device holding the vault key".into(),
                ));
            };
            let key = run.world.store_term(&source, "sync-key").cloned().unwrap();
            run.world
                .send(Channel::pairing(&source, device), key.clone(), Annotation::DeviceSetup)
                .map_err(SchemeError::from)?;
            run.world.put(device, "sync-key", key, Scope::User(user.clone()));
            let sync_pw = run.world.store_term(&user, "sync-password").cloned().expect("deployed");
            run.world
                .send(Channel::web(&user, device), sync_pw.clone(), Annotation::UserAction)
                .map_err(SchemeError::from)?;
            run.world.put(device, "input:sync-password", sync_pw, Scope::User(user.clone()));
            let ct = run
                .world
                .store_term(&server, &format!("vault-ct:{user}"))
                .cloned()
                .expect("uploaded at deploy");
            run.world
                .send(Channel::web(&server, device), ct, Annotation::None)
                .map_err(SchemeError::from)?;
            run.world.put(device, "vault", vault, Scope::User(user.clone()));
        }
        Ok(run.trace_from(start))
    }

    fn authenticate(
        &self,
        run: &mut Run,
        user: &PrincipalId,
        sp: &PrincipalId,
        device: &PrincipalId,
    ) -> AuthOutcome {
        let start = run.world.step();
        if run.world.store_term(device, "vault").is_none() {
            return AuthOutcome::failure(FailureReason::NoAccount, run.trace_from(start));
        }
        // Local-only: the browser auto-fills the stored site credential.
        let acct = site_account(user, sp);
        let pw = Term::WeakSecret(SecretId::new(site_pw_name(user, sp)));

        let result = || -> Result<(), crate::world::WorldError> {
            let w = &mut run.world;
            w.send(Channel::web(user, device), Term::atom("autofill"), Annotation::UserAction)?;
            w.send(
                Channel::web(device, sp),
                Term::pair(acct.clone(), pw.clone()),
                Annotation::AssertionVerifiedLocally,
            )?;
            Ok(())
        }();
        match result {
            Ok(()) => {
                run.world.put(
                    sp,
                    &format!("accepted:{user}"),
                    Term::pair(acct.clone(), pw),
                    Scope::User(user.clone()),
                );
                let session = create_session(&mut run.world, sp, user, acct, device);
                AuthOutcome::success(session, run.trace_from(start))
            }
            Err(_) => AuthOutcome::failure(FailureReason::OutagePath, run.trace_from(start)),
        }
    }

    fn switch_idp(&self, run: &mut Run) -> Result<SwitchOutcome, SchemeError> {
        // The device is the IdP: migrating means synchronizing credentials to
        // a replacement device. No SP ever notices.
        let start = run.world.step();
        run.dep.mark_phase(&run.world, Phase::SwitchIdp);
        let user = run.dep.user.clone();
        let replacement = run
            .world
            .add_principal(&format!("{user}-replacement"), Role::Device, Some(&user));
        run.dep.devices.push(replacement.clone());
        self.setup_device(run, &replacement)?;
        run.dep.home_idp = replacement;
        Ok(SwitchOutcome {
            per_sp_updates: 0,
            intra_federation: false,
            interim_forwarding: false,
            trace: run.trace_from(start),
        })
    }

    fn acceptance(&self, run: &Run, victim: &PrincipalId, sp: &PrincipalId) -> AcceptanceSpec {
        // The SP is a plain password site: knowing the stored credential is
        // necessary and sufficient.
        let pw = Term::WeakSecret(SecretId::new(site_pw_name(victim, sp)));
        AcceptanceSpec {
            routes: vec![Route {
                label: "replay the stored site credential",
                requires: vec![Requirement::Derive(pw)],
                emits: vec![],
            }],
            oracles: vec![],
            attacker_seed: vec![],
            fresh_classes: vec![],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terms::{can_derive, close};
    use crate::world::Fault;

    fn second_device(r: &mut Run) -> PrincipalId {
        let user = r.dep.user.clone();
        let d2 = r.world.add_principal("alice-dev2", Role::Device, Some(&user));
        r.dep.devices.push(d2.clone());
        d2
    }

    #[test]
    fn v15_pairing_transfers_the_vault_key_once() {
        let drv = FirefoxSync { v2: false };
        let mut r = drv.deploy(&DeployConfig::default()).unwrap();
        let d2 = second_device(&mut r);
        let trace = drv.setup_device(&mut r, &d2).unwrap();
        let pairings: Vec<_> = trace
            .iter()
            .filter(|e| e.channel.kind == crate::world::ChannelKind::PairingOob)
            .collect();
        assert_eq!(pairings.len(), 1);
        assert!(matches!(pairings[0].payload, Term::SymKey(_)));
    }

    #[test]
    fn v15_setup_without_existing_device_is_impossible() {
        let drv = FirefoxSync { v2: false };
        let mut r = drv.deploy(&DeployConfig::default()).unwrap();
        // Lose the only provisioned device.
        r.dep.devices.clear();
        let user = r.dep.user.clone();
        let d2 = r.world.add_principal("alice-dev2", Role::Device, Some(&user));
        r.dep.devices.push(d2.clone());
        assert!(matches!(
            drv.setup_device(&mut r, &d2),
            Err(SchemeError::SetupImpossible(_))
        ));
    }

    #[test]
    fn v2_setup_is_a_single_password_entry() {
        let drv = FirefoxSync { v2: true };
        let mut r = drv.deploy(&DeployConfig::default()).unwrap();
        let d2 = second_device(&mut r);
        let trace = drv.setup_device(&mut r, &d2).unwrap();
        let user_actions = Run::count_annotation(&trace, Annotation::UserAction);
        assert_eq!(user_actions, 1);
        assert!(trace
            .iter()
            .all(|e| e.channel.kind != crate::world::ChannelKind::PairingOob));
    }

    #[test]
    fn authentication_is_local_and_survives_server_outage() {
        let drv = FirefoxSync { v2: true };
        let mut r = drv.deploy(&DeployConfig::default()).unwrap();
        let (user, sp, dev) = (r.dep.user.clone(), r.dep.sps[0].clone(), r.dep.primary_device().clone());
        r.world
            .inject(Fault::Outage(PrincipalId::new("syncserver")))
            .unwrap();
        assert!(drv.authenticate(&mut r, &user, &sp, &dev).success);
    }

    #[test]
    fn v15_server_leak_yields_no_vault_plaintext() {
        let drv = FirefoxSync { v2: false };
        let r = drv.deploy(&DeployConfig::default()).unwrap();
        let user = r.dep.user.clone();
        let mut leaked = r.world.leak(&PrincipalId::new("syncserver"));
        leaked.extend(r.world.public());
        let closed = close(&leaked, &r.world.classes).unwrap();
        let site_pw = Term::WeakSecret(SecretId::new(site_pw_name(&user, &r.dep.sps[0])));
        assert!(!closed.contains(&site_pw), "random key never reaches the server");
    }

    #[test]
    fn v2_server_leak_opens_vault_by_offline_guessing() {
        let drv = FirefoxSync { v2: true };
        let r = drv.deploy(&DeployConfig::default()).unwrap();
        let user = r.dep.user.clone();
        let mut leaked = r.world.leak(&PrincipalId::new("syncserver"));
        leaked.extend(r.world.public());
        let site_pw = Term::WeakSecret(SecretId::new(site_pw_name(&user, &r.dep.sps[0])));
        assert!(can_derive(&leaked, &site_pw, &r.world.classes).unwrap());
    }

    #[test]
    fn server_never_holds_the_sync_password_itself() {
        let drv = FirefoxSync { v2: true };
        let r = drv.deploy(&DeployConfig::default()).unwrap();
        let user = r.dep.user.clone();
        let server = PrincipalId::new("syncserver");
        let pw = Term::WeakSecret(SecretId::new(format!("syncpw.{user}")));
        assert!(!r.world.observe(&server).contains(&pw));
    }

    #[test]
    fn switch_to_replacement_device_touches_no_sp() {
        let drv = FirefoxSync { v2: true };
        let mut r = drv.deploy(&DeployConfig::default()).unwrap();
        let out = drv.switch_idp(&mut r).unwrap();
        assert_eq!(out.per_sp_updates, 0);
    }
}
