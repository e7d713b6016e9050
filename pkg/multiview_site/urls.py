"""
URL configuration for multiview_site project.

Only the admin is exposed; it lists ExperimentRun records written by the
management commands.
"""
from django.contrib import admin
from django.urls import path

urlpatterns = [
    path('admin/', admin.site.urls),
]
