//! OpenID 2.0 driver.
//!
//! Decentralized: the user id is a profile URL under the IdP's domain, SPs
//! discover the IdP from it and verify assertions locally with an association
//! key agreed over a back channel (association mode). No registration with
//! anyone, ever.

use crate::terms::Term;
use crate::world::{Annotation, Channel, PrincipalId, Role, Scope};

use super::helpers::*;
use super::*;

pub struct OpenId2;

fn profile_url(user: &PrincipalId, idp: &PrincipalId) -> Term {
    Term::atom(format!("url.{user}.{idp}"))
}

fn assoc_key_name(idp: &PrincipalId, sp: &PrincipalId) -> String {
    format!("assoc.{idp}.{sp}")
}

impl OpenId2 {
    /// Association-mode key, established on first contact over an
    /// authenticated back channel (the key-agreement handshake is modeled as
    /// a single shared-key establishment event).
    fn ensure_association(&self, run: &mut Run, idp: &PrincipalId, sp: &PrincipalId) -> Term {
        let name = assoc_key_name(idp, sp);
        if let Some(k) = run.world.store_term(idp, &name) {
            return k.clone();
        }
        let key = run.world.sym_key(&idp.clone(), &name, true);
        let _ = run.world.send(
            Channel::backchannel(idp, sp),
            Term::pair(Term::atom("assoc-established"), key.clone()),
            Annotation::None,
        );
        run.world.put(idp, &name, key.clone(), Scope::Server);
        run.world.put(sp, &name, key.clone(), Scope::Server);
        key
    }
}

impl SchemeDriver for OpenId2 {
    fn name(&self) -> SchemeName {
        SchemeName::OpenId2
    }

    fn descriptor(&self) -> SchemeDescriptor {
        SchemeDescriptor {
            name: self.name(),
            coords: Coords {
                association: Association::A1,
                conveyance: Conveyance::G1,
                verification: Verification::C2,
                auth_type: AuthType::T1a,
                multi_device: MultiDevice::M1,
            },
            optional_features: vec![],
        }
    }

    fn deploy(&self, cfg: &DeployConfig) -> Result<Run, SchemeError> {
        if cfg.idps == 0 || cfg.sps == 0 {
            return Err(SchemeError::InvalidConfig("need at least one IdP and one SP".into()));
        }
        let (mut w, mut dep) = base_world(cfg, self.name());
        for i in 1..=cfg.idps {
            dep.idps.push(w.add_principal(&format!("idp{i}"), Role::IdP, None));
        }
        dep.home_idp = dep.idps[0].clone();

        // User account at the home IdP: password verifier plus profile URL.
        let user = dep.user.clone();
        let idp = dep.home_idp.clone();
        let pw = w.weak_secret(&user, &format!("pw.{user}.{idp}"));
        w.put(&idp, &format!("pwhash:{user}"), Term::hash(pw.clone()), Scope::User(user.clone()));
        w.put(&user, "password", pw.clone(), Scope::User(user.clone()));
        let url = profile_url(&user, &idp);
        w.make_public(url.clone());
        w.put(&idp, &format!("profile-url:{user}"), url.clone(), Scope::User(user.clone()));

        // SP accounts exist up front, keyed by the (globally stable) URL.
        for sp in dep.sps.clone() {
            w.put(&sp, &format!("account:{user}"), url.clone(), Scope::User(user.clone()));
            put_account_ids(&mut w, &sp, &user, url.clone());
        }
        Ok(Run { world: w, dep })
    }

    fn register_sp(&self, _run: &mut Run, _sp: &PrincipalId) -> Vec<TraceEvent> {
        Vec::new() // any SP may talk to any IdP without sponsorship
    }

    fn setup_device(&self, _run: &mut Run, _device: &PrincipalId) -> Result<Vec<TraceEvent>, SchemeError> {
        Ok(Vec::new()) // remote IdP: nothing to provision
    }

    fn authenticate(
        &self,
        run: &mut Run,
        user: &PrincipalId,
        sp: &PrincipalId,
        device: &PrincipalId,
    ) -> AuthOutcome {
        let start = run.world.step();
        let idp = run.dep.home_idp.clone();
        let url = profile_url(user, &idp);

        if run
            .dep
            .blocked_authority
            .as_deref()
            .is_some_and(|b| b == idp.as_str())
        {
            // SPs resolve the IdP from the URL's domain, so a blocklist can
            // reject before any redirect.
            return AuthOutcome::failure(FailureReason::IdpFiltered, run.trace_from(start));
        }

        let pw = run.world.store_term(user, "password").cloned().expect("deployed");
        let steps = || -> Result<Term, crate::world::WorldError> {
            let w = &mut run.world;
            // User supplies their profile URL to the SP.
            w.send(Channel::web(user, device), url.clone(), Annotation::UserAction)?;
            w.send(Channel::web(device, sp), url.clone(), Annotation::None)?;
            // Discovery: the SP fetches IdP metadata from the profile URL.
            w.send(
                Channel::web(sp, &idp),
                Term::pair(Term::atom("discover"), url.clone()),
                Annotation::None,
            )?;
            w.send(
                Channel::web(&idp, sp),
                Term::pair(Term::atom("idp-endpoint"), Term::atom(idp.as_str())),
                Annotation::None,
            )?;
            Ok(Term::Atom(String::new()))
        }();
        if steps.is_err() {
            return AuthOutcome::failure(FailureReason::OutagePath, run.trace_from(start));
        }

        let assoc = self.ensure_association(run, &idp, sp);

        let result = || -> Result<Term, crate::world::WorldError> {
            let w = &mut run.world;
            // Redirect to the IdP (the request names the SP as return target)
            // and password login.
            w.send(
                Channel::redirect(sp, &idp, device),
                Term::pair(Term::atom("auth-request"), Term::atom(sp.as_str())),
                Annotation::None,
            )?;
            w.send(Channel::web(user, device), pw.clone(), Annotation::UserAction)?;
            w.put(device, "input:password", pw.clone(), Scope::User(user.clone()));
            w.send(Channel::web(device, &idp), pw.clone(), Annotation::None)?;

            // Signed (MACed) positive assertion back through the browser.
            let n = w.nonce(&idp, "assert");
            let assertion = Term::mac(
                assoc.clone(),
                Term::list(&[url.clone(), Term::atom(sp.as_str()), n]),
            );
            w.send(Channel::redirect(&idp, sp, device), assertion.clone(), Annotation::AssertionIssued)?;
            Ok(assertion)
        }();

        match result {
            Ok(assertion) => {
                let w = &mut run.world;
                w.put(sp, &format!("accepted:{user}"), assertion, Scope::User(user.clone()));
                let session = create_session(w, sp, user, url.clone(), device);
                // Local MAC check with the association key; no validation
                // round trip.
                let _ = w.send(
                    Channel::web(sp, device),
                    Term::atom("login-ok"),
                    Annotation::AssertionVerifiedLocally,
                );
                AuthOutcome::success(session, run.trace_from(start))
            }
            Err(_) => AuthOutcome::failure(FailureReason::OutagePath, run.trace_from(start)),
        }
    }

    fn switch_idp(&self, run: &mut Run) -> Result<SwitchOutcome, SchemeError> {
        if run.dep.idps.len() < 2 {
            return Err(SchemeError::SwitchImpossible("no second IdP deployed".into()));
        }
        let start = run.world.step();
        run.dep.mark_phase(&run.world, Phase::SwitchIdp);
        let user = run.dep.user.clone();
        let new_idp = run.dep.idps[1].clone();

        let pw = run.world.weak_secret(&user, &format!("pw.{user}.{new_idp}"));
        run.world.put(
            &new_idp,
            &format!("pwhash:{user}"),
            Term::hash(pw.clone()),
            Scope::User(user.clone()),
        );
        run.world.put(&user, "password", pw, Scope::User(user.clone()));
        let new_url = profile_url(&user, &new_idp);
        run.world.make_public(new_url.clone());

        // The profile URL changes, so every SP account must be repointed.
        let mut updates = 0;
        for sp in run.dep.sps.clone() {
            let dev = run.dep.primary_device().clone();
            let _ = run.world.send(Channel::web(&user, &dev), new_url.clone(), Annotation::UserAction);
            let _ = run.world.send(Channel::web(&dev, &sp), new_url.clone(), Annotation::UserAction);
            run.world.put(&sp, &format!("account:{user}"), new_url.clone(), Scope::User(user.clone()));
            put_account_ids(&mut run.world, &sp, &user, new_url.clone());
            updates += 1;
        }
        run.dep.home_idp = new_idp;
        Ok(SwitchOutcome {
            per_sp_updates: updates,
            intra_federation: false,
            interim_forwarding: false,
            trace: run.trace_from(start),
        })
    }

    fn acceptance(&self, run: &Run, victim: &PrincipalId, sp: &PrincipalId) -> AcceptanceSpec {
        let idp = run.dep.home_idp.clone();
        let url = profile_url(victim, &idp);
        let assoc = match run.world.store_term(&idp, &assoc_key_name(&idp, sp)) {
            Some(k) => k.clone(),
            None => return AcceptanceSpec::default(),
        };
        let pw = run.world.store_term(victim, "password").cloned().expect("deployed");
        let fresh = Term::Nonce(crate::terms::SecretId::new("atk.nonce"));

        AcceptanceSpec {
            routes: vec![Route {
                label: "forge or obtain a MACed positive assertion",
                requires: vec![Requirement::Derive(Term::mac(
                    assoc.clone(),
                    Term::list(&[url.clone(), Term::atom(sp.as_str()), fresh.clone()]),
                ))],
                emits: vec![],
            }],
            oracles: vec![Oracle {
                id: "idp-login",
                issuer: idp,
                needs: vec![pw],
                yields: vec![Term::mac(
                    assoc,
                    Term::list(&[url, Term::atom(sp.as_str()), fresh.clone()]),
                )],
                emits: vec![],
            }],
            attacker_seed: vec![fresh.clone()],
            fresh_classes: vec![(fresh, crate::terms::SecretClass::strong())],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run() -> Run {
        OpenId2.deploy(&DeployConfig::default()).unwrap()
    }

    #[test]
    fn deploy_creates_no_federation_operator() {
        let r = run();
        assert!(r.dep.operator.is_none());
        assert_eq!(r.dep.idps.len(), 2);
    }

    #[test]
    fn register_sp_emits_no_events() {
        let mut r = run();
        let sp = r.dep.sps[0].clone();
        assert!(OpenId2.register_sp(&mut r, &sp).is_empty());
    }

    #[test]
    fn authenticate_creates_session_via_redirect() {
        let mut r = run();
        let (user, sp, dev) = (r.dep.user.clone(), r.dep.sps[0].clone(), r.dep.primary_device().clone());
        let out = OpenId2.authenticate(&mut r, &user, &sp, &dev);
        assert!(out.success);
        assert!(has_session(&r.world, &sp, &user));
        assert_eq!(Run::count_annotation(&out.trace, Annotation::AssertionIssued), 1);
        assert_eq!(Run::count_annotation(&out.trace, Annotation::IdPQueried), 0);
    }

    #[test]
    fn switch_updates_every_sp() {
        let mut cfg = DeployConfig::default();
        cfg.sps = 3;
        let mut r = OpenId2.deploy(&cfg).unwrap();
        let out = OpenId2.switch_idp(&mut r).unwrap();
        assert_eq!(out.per_sp_updates, 3);
        assert!(!out.intra_federation);
    }
}
