"""jinja2 templates for the gnuplot script and the HTML run summary."""
from jinja2 import DictLoader, Environment, StrictUndefined, select_autoescape

GNUPLOT = """\
# gnuplot script written by percoz {{ version }} for `{{ command }}` (spec {{ spec_hash[:12] }})
set datafile separator ","
set key top right
set grid
{% for plot in plots %}
# --- {{ plot.title or plot.table }}
set title "{{ plot.title or plot.table }}"
set xlabel "{{ plot.x }}"
set ylabel "{{ plot.y }}"
{% if plot.logscale_y %}set logscale y{% else %}unset logscale y{% endif %}

plot "{{ files[plot.table] }}" using "{{ plot.x }}":"{{ plot.y }}"{% if plot.yerr %}:"{{ plot.yerr }}" with yerrorbars{% else %} with linespoints{% endif %} title "{{ plot.y }}"
{% if not loop.last %}pause -1 "next plot"
{% endif %}
{% endfor %}
"""

REPORT = """\
<!DOCTYPE html>
<html lang="en">
<head>
  <meta charset="utf-8" />
  <title>{{ title }}</title>
  <style>
    body { font-family: ui-sans-serif, system-ui, -apple-system, "Segoe UI", Roboto; margin: 24px; color: #0b1020; }
    table { border-collapse: collapse; width: 100%; }
    th, td { border: 1px solid #b7c1d6; padding: 8px 10px; text-align: left; font-size: 14px; vertical-align: top; }
    th { background: #eef3ff; }
    tr:nth-child(even) td { background: #fafcff; }
    .ok { color: #0a7a3b; font-weight: 600; }
    .defect { color: #b3261e; font-weight: 600; }
    .muted { color: #6b7485; }
    code { background: #f3f6ff; padding: 1px 6px; border-radius: 8px; }
    ul { margin: 4px 0 0 18px; padding: 0; }
  </style>
</head>
<body>
  <h2>{{ title }}</h2>
  <p class="muted">percoz {{ version }}</p>
  <table>
    <thead>
      <tr><th>#</th><th>Step</th><th>Spec</th><th>Status</th><th>Wall time (s)</th><th>Files</th><th>Defects</th></tr>
    </thead>
    <tbody>
    {% for s in steps %}
      <tr>
        <td>{{ s.step }}</td>
        <td><b>{{ s.name }}</b>{% if s.detail %}<div class="muted">{{ s.detail }}</div>{% endif %}</td>
        <td><code>{{ s.spec_hash[:12] }}</code></td>
        <td class="{{ 'ok' if s.status == 'ok' else 'defect' }}">{{ s.status }}</td>
        <td>{{ '%.2f' % s.wall_time_s if s.wall_time_s is not none else '-' }}</td>
        <td>{% if s.files %}<ul>{% for f in s.files %}<li><code>{{ f }}</code></li>{% endfor %}</ul>{% else %}-{% endif %}</td>
        <td>{% if s.defects %}<ul>{% for d in s.defects %}<li>{{ d }}</li>{% endfor %}</ul>{% else %}-{% endif %}</td>
      </tr>
    {% endfor %}
    </tbody>
  </table>
  {% for s in steps if s.metrics %}
  <h3>{{ s.step }}. {{ s.name }}</h3>
  <table>
    <tbody>
    {% for key, value in s.metrics.items() %}
      <tr><th>{{ key }}</th><td><code>{{ value }}</code></td></tr>
    {% endfor %}
    </tbody>
  </table>
  {% endfor %}
</body>
</html>
"""

environment = Environment(
    loader=DictLoader({"plot.gp": GNUPLOT, "report.html": REPORT}),
    autoescape=select_autoescape(["html"]),
    undefined=StrictUndefined,
    keep_trailing_newline=True,
    trim_blocks=True,
)


def render(name: str, **context) -> str:
    return environment.get_template(name).render(**context)
