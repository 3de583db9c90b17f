// Worker-side bootstrap for the rating assignment. Reads the embedded
// configuration and the per-session inputs, walks the sections
// (qualification, setup, training, ratings) and writes one flat form payload
// whose field names follow the answer schema.
(function () {
  "use strict";

  var cfg = JSON.parse(document.getElementById("p808-config").textContent);
  var form = document.getElementById("p808-form");
  var store = window.localStorage;
  var answers = {};

  function input(name) {
    var el = document.getElementById("in-" + name);
    return el ? el.value : "";
  }

  function now() {
    return Math.floor(Date.now() / 1000);
  }

  function hex(buf) {
    return Array.prototype.map
      .call(new Uint8Array(buf), function (b) { return ("0" + b.toString(16)).slice(-2); })
      .join("");
  }

  function keyBytes() {
    var k = cfg.certificate_key, out = new Uint8Array(k.length / 2);
    for (var i = 0; i < out.length; i++) out[i] = parseInt(k.substr(i * 2, 2), 16);
    return out;
  }

  function sign(kind, worker, issued, ttl) {
    var msg = new TextEncoder().encode([kind, worker, issued, ttl].join("|"));
    return crypto.subtle
      .importKey("raw", keyBytes(), { name: "HMAC", hash: "SHA-256" }, false, ["sign"])
      .then(function (key) { return crypto.subtle.sign("HMAC", key, msg); })
      .then(function (tag) {
        return ["p808v1", kind, worker, issued, ttl, hex(tag)].join("|");
      });
  }

  function readCert(storageKey) {
    var token = store ? store.getItem(storageKey) : null;
    if (!token) return null;
    var parts = token.split("|");
    if (parts.length < 6) return null;
    var ttl = parseInt(parts[parts.length - 2], 10);
    var issued = parseInt(parts[parts.length - 3], 10);
    return { token: token, issued: issued, ttl: ttl, live: ttl === 0 || now() < issued + ttl };
  }

  function fingerprint() {
    var token = store && store.getItem(cfg.storage_keys.fingerprint);
    if (!token) {
      var rnd = new Uint8Array(16);
      crypto.getRandomValues(rnd);
      token = hex(rnd.buffer);
      if (store) store.setItem(cfg.storage_keys.fingerprint, token);
    }
    return crypto.subtle
      .digest("SHA-256", new TextEncoder().encode(navigator.userAgent + "|" + token))
      .then(hex);
  }

  function detectHeadset() {
    if (!navigator.mediaDevices || !navigator.mediaDevices.enumerateDevices) {
      return Promise.resolve([]);
    }
    return navigator.mediaDevices.enumerateDevices().then(
      function (devices) {
        return devices
          .filter(function (d) { return d.kind === "audiooutput" || d.kind === "audioinput"; })
          .map(function (d) { return d.label; })
          .filter(function (l) { return l; });
      },
      function () { return []; }
    );
  }

  // Rating controls stay disabled until the clip ended without skipping.
  function trackPlayback(audio, onDone) {
    var maxPos = 0;
    audio.addEventListener("timeupdate", function () {
      if (audio.currentTime <= maxPos + 1.0) maxPos = Math.max(maxPos, audio.currentTime);
    });
    audio.addEventListener("ended", function () {
      onDone(maxPos + 1.0 >= audio.duration);
    });
  }

  function scaleFieldset(name) {
    var tpl = document.getElementById("p808-scale-template");
    var node = tpl.content.cloneNode(true);
    node.querySelectorAll("input[type=radio]").forEach(function (r) {
      r.name = name;
      r.disabled = true;
    });
    return node;
  }

  function questions() {
    var block = cfg.rating_block, items = [], rating = [];
    for (var i = 1; i <= block; i++) {
      rating.push({ field: "rating_" + i, url: input("rating_" + i + "_url"),
        ref: input("rating_" + i + "_ref_url"), order: input("rating_" + i + "_order") });
    }
    var trap = { field: "trapping", url: input("trapping_url"), ref: input("trapping_ref_url"),
      order: input("trapping_order") };
    var gold = { field: "gold", url: input("gold_url"), ref: input("gold_ref_url"),
      order: input("gold_order") };
    var ts = parseInt(input("trapping_slot"), 10), gs = parseInt(input("gold_slot"), 10);
    for (var s = 0; s < block + 2; s++) {
      items.push(s === ts ? trap : s === gs ? gold : rating.shift());
    }
    return items;
  }

  function renderRatings() {
    var host = document.getElementById("p808-questions");
    var played = {};
    questions().forEach(function (q) {
      var div = document.createElement("div");
      div.className = "p808-question";
      var clips = [q.url];
      if (cfg.method === "DCR") clips = [q.ref, q.url];
      if (cfg.method === "CCR") clips = q.order === "proc_first" ? [q.url, q.ref] : [q.ref, q.url];
      var remaining = clips.length, complete = true;
      var fs = scaleFieldset(q.field + "_value_input");
      clips.forEach(function (url) {
        var a = document.createElement("audio");
        a.controls = true;
        a.preload = "none";
        a.src = url;
        trackPlayback(a, function (ok) {
          complete = complete && ok;
          if (--remaining === 0) {
            played[q.field] = complete;
            div.querySelectorAll("input[type=radio]").forEach(function (r) { r.disabled = false; });
          }
        });
        div.appendChild(a);
      });
      div.appendChild(fs);
      host.appendChild(div);
      answers[q.field + "_clip"] = q.url;
      answers[q.field + "_order"] = cfg.method === "CCR" ? q.order : "";
    });
    return played;
  }

  function show(id, on) {
    document.getElementById(id).hidden = !on;
  }

  function main() {
    var worker = new URLSearchParams(location.search).get("workerId") || "";
    var qual = readCert(cfg.storage_keys.qualification);
    var env = readCert(cfg.storage_keys.environment);
    if (store && store.getItem(cfg.storage_keys.qualification + ".failed")) {
      show("p808-disabled", true);
      return;
    }
    var needQual = cfg.sections.qualification && !qual;
    var needEnv = cfg.sections.environment_test && !(env && env.live);
    show("p808-qualification", needQual);
    show("p808-setup", needEnv);
    show("p808-training", cfg.sections.training);
    show("p808-earpods", cfg.sections.earpods_check);
    show("p808-ratings", true);
    var played = renderRatings();
    document.getElementById("p808-submit").disabled = false;

    form.addEventListener("submit", function (ev) {
      ev.preventDefault();
      var tasks = [fingerprint(), detectHeadset()];
      var certs = [qual && qual.token, env && env.live && env.token].filter(Boolean);
      var t = now();
      answers.submit_time = t;
      answers.session_id = input("session_id");
      answers.method = cfg.method;
      questions().forEach(function (q) {
        var sel = form.querySelector("input[name='" + q.field + "_value_input']:checked");
        answers[q.field + (q.field.indexOf("rating_") === 0 ? "_value" : "_answer")] = sel ? sel.value : "";
        answers[q.field + "_played"] = played[q.field] ? "1" : "0";
      });
      answers.trapping_expected = input("trapping_answer");
      answers.gold_expected = input("gold_answer");
      answers.gold_tolerance = input("gold_tolerance");
      var ear = form.querySelector("[name=earpods_answer_input]").value.trim();
      answers.earpods_answer = ear;
      answers.earpods_passed = cfg.earpods_answer && ear === cfg.earpods_answer ? "1" : "0";
      if (needEnv) {
        var envAns = cfg.environment.pairs.map(function (_, i) {
          var c = form.querySelector("input[name='env_" + i + "']:checked");
          return c ? c.value : "";
        });
        var correct = envAns.filter(function (a, i) {
          return a !== "" && parseInt(a, 10) === cfg.environment.pairs[i].better;
        }).length;
        answers.env_answers = envAns.join(";");
        answers.env_passed = correct >= cfg.environment.pass_threshold ? "1" : "0";
        if (correct >= cfg.environment.pass_threshold) {
          tasks.push(sign("environment", worker, t, cfg.environment.ttl_seconds).then(function (tok) {
            if (store) store.setItem(cfg.storage_keys.environment, tok);
            certs.push(tok);
          }));
        }
      }
      Promise.all(tasks).then(function (res) {
        answers.client_fingerprint = res[0];
        answers.detected_devices = res[1].join(";");
        answers.certificates = certs.join(";");
        Object.keys(answers).forEach(function (k) {
          var h = document.createElement("input");
          h.type = "hidden";
          h.name = k;
          h.value = answers[k];
          form.appendChild(h);
        });
        form.submit();
      });
    });
  }

  document.addEventListener("DOMContentLoaded", main);
})();
